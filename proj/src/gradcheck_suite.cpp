#include "mvst/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <stdexcept>

#include "mvst/fusion.hpp"
#include "mvst/gradcheck.hpp"
#include "mvst/hash.hpp"
#include "mvst/model.hpp"
#include "mvst/network.hpp"
#include "mvst/rng.hpp"

namespace mvst {

namespace {

Tensor random(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = true) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> v(n);
    for (auto& x : v) x = stddev * rng.normal();
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// Σ R⊙(y − y₀) with a fixed random R. y₀ is the first value seen (the
/// unperturbed point), so the loss sits near zero and finite differences
/// lose no digits to the large unperturbed terms.
struct Projection {
    Tensor r;
    std::shared_ptr<Tensor> baseline = std::make_shared<Tensor>();

    Tensor operator()(const Tensor& y) const {
        if (!baseline->defined()) *baseline = y.detach();
        return sum(hadamard(add(y, scale(*baseline, -1.0)), r));
    }
};

Projection projection(const Shape& shape, Rng& rng) { return {random(shape, rng, 1.0, false)}; }

std::vector<GradProbe> probes(std::initializer_list<Tensor> ts) {
    std::vector<GradProbe> out;
    for (const auto& t : ts) out.push_back({t, {}});
    return out;
}

model::BlockParams random_block(std::size_t d, std::size_t hidden, Rng& rng) {
    model::BlockParams b;
    const double s = 0.25;
    b.ln1 = {random({d}, rng, 0.3), random({d}, rng, 0.3)};
    b.ln2 = {random({d}, rng, 0.3), random({d}, rng, 0.3)};
    for (auto& g : {b.ln1.gain, b.ln2.gain}) {
        auto v = Tensor(g).mutable_data();
        for (auto& x : v) x += 1.0;
    }
    b.wq = random({d, d}, rng, 2 * s);
    b.wk = random({d, d}, rng, 2 * s);
    b.wv = random({d, d}, rng, s);
    b.wo = random({d, d}, rng, s);
    b.fc1_w = random({d, hidden}, rng, s);
    b.fc1_b = random({hidden}, rng, 0.1);
    b.fc2_w = random({hidden, d}, rng, s);
    b.fc2_b = random({d}, rng, 0.1);
    return b;
}

std::vector<GradProbe> block_probes(const Tensor& x, const model::BlockParams& b, bool mlp) {
    std::vector<GradProbe> p = probes({x, b.ln1.gain, b.ln1.bias, b.wq, b.wk, b.wv, b.wo});
    if (mlp)
        for (const auto& t : {b.ln2.gain, b.ln2.bias, b.fc1_w, b.fc1_b, b.fc2_w, b.fc2_b}) p.push_back({t, {}});
    return p;
}

constexpr double kStep = 1e-3;

GradCheckResult check(const std::function<Tensor()>& loss, std::vector<GradProbe> p) {
    return grad_check(loss, std::move(p), kStep, FdScheme::richardson);
}

using Case = std::function<GradCheckResult(Rng&)>;

struct OpCase {
    const char* name;
    Case run;
};

const std::vector<OpCase>& cases() {
    static const std::vector<OpCase> all = {
        {"matmul",
         [](Rng& rng) {
             auto a = random({4, 5}, rng), b = random({5, 3}, rng);
             auto p = projection({4, 3}, rng);
             return check([=] { return p(matmul(a, b)); }, probes({a, b}));
         }},
        {"transpose",
         [](Rng& rng) {
             auto a = random({3, 5}, rng);
             auto p = projection({5, 3}, rng);
             return check([=] { return p(transpose(a)); }, probes({a}));
         }},
        {"add",
         [](Rng& rng) {
             auto a = random({3, 4}, rng), b = random({3, 4}, rng);
             auto p = projection({3, 4}, rng);
             return check([=] { return p(add(a, b)); }, probes({a, b}));
         }},
        {"add_row",
         [](Rng& rng) {
             auto x = random({4, 3}, rng), b = random({3}, rng);
             auto p = projection({4, 3}, rng);
             return check([=] { return p(add_row(x, b)); }, probes({x, b}));
         }},
        {"scale",
         [](Rng& rng) {
             auto x = random({3, 4}, rng);
             const double s = rng.uniform(-2.0, 2.0);
             auto p = projection({3, 4}, rng);
             return check([=] { return p(scale(x, s)); }, probes({x}));
         }},
        {"hadamard",
         [](Rng& rng) {
             auto a = random({3, 4}, rng), b = random({3, 4}, rng);
             auto p = projection({3, 4}, rng);
             return check([=] { return p(hadamard(a, b)); }, probes({a, b}));
         }},
        {"sigmoid",
         [](Rng& rng) {
             auto x = random({4, 5}, rng, 1.5);
             auto p = projection({4, 5}, rng);
             return check([=] { return p(sigmoid(x)); }, probes({x}));
         }},
        {"gelu",
         [](Rng& rng) {
             auto x = random({4, 5}, rng, 1.5);
             auto p = projection({4, 5}, rng);
             return check([=] { return p(gelu(x)); }, probes({x}));
         }},
        {"softmax_rows",
         [](Rng& rng) {
             auto x = random({4, 6}, rng, 2.0);
             auto p = projection({4, 6}, rng);
             return check([=] { return p(softmax_rows(x)); }, probes({x}));
         }},
        {"layer_norm",
         [](Rng& rng) {
             auto x = random({4, 6}, rng, 2.0), g = random({6}, rng), b = random({6}, rng);
             auto p = projection({4, 6}, rng);
             return check([=] { return p(layer_norm(x, g, b)); }, probes({x, g, b}));
         }},
        {"mean_pool_rows",
         [](Rng& rng) {
             auto x = random({5, 4}, rng);
             auto p = projection({1, 4}, rng);
             return check([=] { return p(mean_pool_rows(x)); }, probes({x}));
         }},
        {"sum",
         [](Rng& rng) {
             auto x = random({3, 4}, rng);
             auto p = projection({3, 4}, rng);
             // a nonlinear map first so the gradient depends on x
             return check([=] { return p(hadamard(x, x)); }, probes({x}));
         }},
        {"slice_cols",
         [](Rng& rng) {
             auto x = random({3, 7}, rng);
             auto p = projection({3, 3}, rng);
             return check([=] { return p(slice_cols(x, 2, 3)); }, probes({x}));
         }},
        {"concat_cols",
         [](Rng& rng) {
             auto a = random({3, 2}, rng), b = random({3, 4}, rng);
             auto p = projection({3, 6}, rng);
             return check(
                 [=] {
                     const Tensor parts[] = {a, b};
                     return p(concat_cols(parts));
                 },
                 probes({a, b}));
         }},
        {"dropout",
         [](Rng& rng) {
             auto x = random({4, 5}, rng);
             auto p = projection({4, 5}, rng);
             const Rng mask_rng = rng.split(1);
             return check(
                 [=] {
                     Rng r = mask_rng;
                     return p(dropout(x, 0.3, r));
                 },
                 probes({x}));
         }},
        {"cross_entropy",
         [](Rng& rng) {
             auto x = random({3, 4}, rng, 2.0);
             std::vector<int> labels(3);
             for (auto& y : labels) y = static_cast<int>(rng.below(4));
             std::vector<double> w(4);
             for (auto& v : w) v = rng.uniform(0.5, 2.0);
             return check([=] { return cross_entropy(x, labels, w); }, probes({x}));
         }},
        {"embed_tokens",
         [](Rng& rng) {
             const model::ViewConfig view(4, 1);
             model::ViewParams params{view, random({4, 6}, rng, 0.5), random({6}, rng, 0.5), random({4, 6}, rng, 0.5),
                                      {}};
             auto tokens = random({4, 4}, rng);
             auto p = projection({4, 6}, rng);
             return check([=] { return p(model::embed_tokens(tokens, params)); },
                               probes({tokens, params.embed_w, params.embed_b, params.pos}));
         }},
        {"msa",
         [](Rng& rng) {
             auto x = random({4, 8}, rng);
             const auto b = random_block(8, 16, rng);
             auto p = projection({4, 8}, rng);
             const model::BlockOptions opt{2, model::MlpGelu::outer, 1e-5, 0.0, nullptr, nullptr};
             return check([=] { return p(model::msa(x, b, opt)); }, block_probes(x, b, false));
         }},
        {"encoder_block",
         [](Rng& rng) {
             auto x = random({4, 8}, rng);
             const auto b = random_block(8, 16, rng);
             auto p = projection({4, 8}, rng);
             const model::BlockOptions opt{2, model::MlpGelu::outer, 1e-5, 0.0, nullptr, nullptr};
             return check([=] { return p(model::encoder_block(x, b, opt)); }, block_probes(x, b, true));
         }},
        {"encoder_block_inner_gelu",
         [](Rng& rng) {
             auto x = random({4, 8}, rng);
             const auto b = random_block(8, 16, rng);
             auto p = projection({4, 8}, rng);
             const model::BlockOptions opt{2, model::MlpGelu::inner, 1e-5, 0.0, nullptr, nullptr};
             return check([=] { return p(model::encoder_block(x, b, opt)); }, block_probes(x, b, true));
         }},
        {"gates_per_view",
         [](Rng& rng) {
             std::vector<Tensor> f{random({4, 8}, rng), random({4, 8}, rng), random({4, 8}, rng)};
             fusion::GateParams g{{random({8, 8}, rng, 0.4), random({8, 8}, rng, 0.4), random({8, 8}, rng, 0.4)}};
             std::vector<Projection> ps{projection({4, 8}, rng), projection({4, 8}, rng), projection({4, 8}, rng)};
             auto pr = probes({f[0], f[1], f[2], g.w[0], g.w[1], g.w[2]});
             return check(
                 [=] {
                     const auto gates = fusion::gate_coefficients(f, g, fusion::GateMode::per_view);
                     return add(add(ps[0](gates[0]), ps[1](gates[1])), ps[2](gates[2]));
                 },
                 pr);
         }},
        {"gates_shared_sum",
         [](Rng& rng) {
             std::vector<Tensor> f{random({4, 8}, rng), random({4, 8}, rng), random({4, 8}, rng)};
             fusion::GateParams g{{random({8, 8}, rng, 0.3), random({8, 8}, rng, 0.3), random({8, 8}, rng, 0.3)}};
             std::vector<Projection> ps{projection({4, 8}, rng), projection({4, 8}, rng), projection({4, 8}, rng)};
             auto pr = probes({f[0], f[1], f[2], g.w[0], g.w[1], g.w[2]});
             return check(
                 [=] {
                     const auto gates = fusion::gate_coefficients(f, g, fusion::GateMode::shared_sum);
                     Tensor total = ps[0](gates[0]);
                     for (std::size_t i = 1; i < gates.size(); ++i) total = add(total, ps[i](gates[i]));
                     return total;
                 },
                 pr);
         }},
        {"fuse",
         [](Rng& rng) {
             std::vector<Tensor> f{random({4, 8}, rng), random({4, 8}, rng), random({4, 8}, rng)};
             std::vector<Tensor> g{random({4, 8}, rng), random({4, 8}, rng), random({4, 8}, rng)};
             auto p = projection({4, 8}, rng);
             return check([=] { return p(fusion::fuse(f, g)); }, probes({f[0], f[1], f[2], g[0], g[1], g[2]}));
         }},
        {"classify",
         [](Rng& rng) {
             auto fused = random({4, 8}, rng);
             fusion::ClassifierParams h{random({8, 8}, rng, 0.5), random({8}, rng, 0.3), random({8, 4}, rng, 0.5),
                                        random({4}, rng, 0.3)};
             const int label = static_cast<int>(rng.below(4));
             return check(
                 [=] {
                     const int y[] = {label};
                     return cross_entropy(fusion::classify(fused, h), y);
                 },
                 probes({fused, h.fc1_w, h.fc1_b, h.fc2_w, h.fc2_b}));
         }},
    };
    return all;
}

}  // namespace

std::vector<std::string> differentiable_ops() {
    std::vector<std::string> out;
    for (const auto& c : cases()) out.emplace_back(c.name);
    return out;
}

std::vector<SuiteEntry> run_op_suite(std::uint64_t seed, int seeds, double threshold) {
    if (seeds < 1) throw std::invalid_argument("run_op_suite: need at least one seed");
    const Rng root(seed);
    std::vector<SuiteEntry> report;
    for (const auto& c : cases()) {
        SuiteEntry e{c.name, seeds, 0, 0.0, threshold};
        for (int s = 0; s < seeds; ++s) {
            Rng rng = root.split(fnv1a(c.name)).split(static_cast<std::uint64_t>(s));
            const auto r = c.run(rng);
            e.checked += r.checked;
            e.max_rel_error = std::max(e.max_rel_error, r.max_rel_error);
        }
        report.push_back(e);
    }
    return report;
}

SuiteEntry run_end_to_end_check(std::uint64_t seed, int coordinates, double threshold) {
    NetworkConfig cfg;
    cfg.model.n = 32;
    cfg.model.d_t = 16;
    cfg.model.depth = 1;
    cfg.model.heads = 2;
    cfg.model.mlp_ratio = 2;
    cfg.model.views = {0, 1, 2};
    // wider than the training init so every parameter carries a gradient
    // well above finite-difference round-off
    cfg.init_std = 0.2;
    Network net(cfg, seed);

    Rng rng = Rng(seed).split(fnv1a("end_to_end"));
    Matrix mel(32, 32);
    for (auto& v : mel.values) v = rng.uniform();
    const int label = static_cast<int>(rng.below(4));

    const auto named = net.named_parameters();
    std::size_t total = 0;
    for (const auto& [name, t] : named) total += t.size();
    // biases start at zero and LN gains at one; perturb them so no parameter
    // sits at a symmetric point
    for (const auto& [name, t] : named) {
        auto v = Tensor(t).mutable_data();
        for (auto& x : v) x += 0.1 * rng.normal();
    }

    std::vector<GradProbe> probes;
    std::vector<std::size_t> picks;
    while (picks.size() < static_cast<std::size_t>(coordinates)) {
        const auto flat = static_cast<std::size_t>(rng.below(total));
        if (std::find(picks.begin(), picks.end(), flat) == picks.end()) picks.push_back(flat);
    }
    std::sort(picks.begin(), picks.end());
    std::size_t offset = 0;
    for (const auto& [name, t] : named) {
        GradProbe p{t, {}};
        for (auto flat : picks)
            if (flat >= offset && flat < offset + t.size()) p.indices.push_back(flat - offset);
        if (!p.indices.empty()) probes.push_back(std::move(p));
        offset += t.size();
    }

    const auto r = check(
        [&] {
            const int y[] = {label};
            return cross_entropy(net.forward(mel), y);
        },
        probes);
    return SuiteEntry{"end_to_end_tiny_mvst", 1, r.checked, r.max_rel_error, threshold};
}

}  // namespace mvst
