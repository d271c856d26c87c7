#include "mvst/fusion.hpp"

#include <stdexcept>
#include <string>

#include "mvst/hash.hpp"
#include "mvst/rng.hpp"

namespace mvst::fusion {

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, std::string_view name, double std) {
    Rng rng = Rng(seed).split(fnv1a(name));
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.truncated_normal(std);
    return Tensor::from({rows, cols}, std::move(v), true);
}

}  // namespace

GateParams init_gates(const std::vector<int>& levels, std::size_t d_t, std::uint64_t seed, double init_std) {
    GateParams g;
    for (int level : levels)
        g.w.push_back(random_matrix(d_t, d_t, seed, "gate.view" + std::to_string(level) + ".w", init_std));
    return g;
}

ClassifierParams init_classifier(std::size_t d_t, std::size_t classes, std::uint64_t seed, double init_std) {
    return {random_matrix(d_t, d_t, seed, "head.fc1_w", init_std), Tensor::zeros({d_t}, true),
            random_matrix(d_t, classes, seed, "head.fc2_w", init_std), Tensor::zeros({classes}, true)};
}

void append_named(const GateParams& gates, const std::vector<int>& levels, model::NamedTensors& out) {
    if (levels.size() != gates.w.size()) throw std::invalid_argument("gate count does not match view count");
    for (std::size_t i = 0; i < gates.w.size(); ++i)
        out.emplace_back("gate.view" + std::to_string(levels[i]) + ".w", gates.w[i]);
}

void append_named(const ClassifierParams& head, model::NamedTensors& out) {
    out.emplace_back("head.fc1_w", head.fc1_w);
    out.emplace_back("head.fc1_b", head.fc1_b);
    out.emplace_back("head.fc2_w", head.fc2_w);
    out.emplace_back("head.fc2_b", head.fc2_b);
}

std::vector<Tensor> gate_coefficients(const std::vector<Tensor>& features, const GateParams& gates, GateMode mode) {
    if (features.empty()) throw TensorError("gate_coefficients: no features");
    if (features.size() != gates.w.size()) throw TensorError("gate_coefficients: one gate matrix per view required");
    for (const auto& f : features)
        if (f.shape() != features.front().shape()) throw TensorError("gate_coefficients: views differ in shape");

    std::vector<Tensor> out;
    if (mode == GateMode::per_view) {
        for (std::size_t i = 0; i < features.size(); ++i)
            out.push_back(sigmoid(matmul(features[i], transpose(gates.w[i]))));
        return out;
    }
    Tensor acc = matmul(features[0], transpose(gates.w[0]));
    for (std::size_t i = 1; i < features.size(); ++i) acc = add(acc, matmul(features[i], transpose(gates.w[i])));
    const Tensor shared = sigmoid(acc);
    out.assign(features.size(), shared);
    return out;
}

Tensor fuse(const std::vector<Tensor>& features, const std::vector<Tensor>& gates) {
    if (features.empty() || features.size() != gates.size()) throw TensorError("fuse: need one gate per view");
    Tensor acc = hadamard(gates[0], features[0]);
    for (std::size_t i = 1; i < features.size(); ++i) acc = add(acc, hadamard(gates[i], features[i]));
    return acc;
}

Tensor classify(const Tensor& fused, const ClassifierParams& head) {
    const auto pooled = mean_pool_rows(fused);
    const auto hidden = gelu(add_row(matmul(pooled, head.fc1_w), head.fc1_b));
    return add_row(matmul(hidden, head.fc2_w), head.fc2_b);
}

}  // namespace mvst::fusion
