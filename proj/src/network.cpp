#include "mvst/network.hpp"

#include <stdexcept>

namespace mvst {

void NetworkConfig::validate() const {
    model.validate();
    if (classes < 2) throw std::invalid_argument("network config: need at least two classes");
    if (init_std <= 0.0) throw std::invalid_argument("network config: init_std must be positive");
}

Network::Network(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    const auto& m = config_.model;
    const auto d = static_cast<std::size_t>(m.d_t);
    for (int level : m.views) views_.push_back(model::init_view(m, level, seed, config_.init_std));
    gates_ = fusion::init_gates(m.views, d, seed, config_.init_std);
    head_ = fusion::init_classifier(d, static_cast<std::size_t>(config_.classes), seed, config_.init_std);
}

model::NamedTensors Network::named_parameters() const {
    model::NamedTensors out;
    for (const auto& v : views_) model::append_named(v, out);
    fusion::append_named(gates_, config_.model.views, out);
    fusion::append_named(head_, out);
    return out;
}

std::vector<Tensor> Network::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
}

void Network::zero_grad() {
    for (auto& p : parameters()) p.zero_grad();
}

Network::Trace Network::forward_trace(const Matrix& mel, Rng* dropout_rng) const {
    Trace t;
    t.features = model::forward_all_views(mel, views_, config_.model, dropout_rng);
    t.gates = fusion::gate_coefficients(t.features, gates_, config_.gate_mode);
    t.fused = fusion::fuse(t.features, t.gates);
    t.logits = fusion::classify(t.fused, head_);
    return t;
}

Tensor Network::forward(const Matrix& mel, Rng* dropout_rng) const { return forward_trace(mel, dropout_rng).logits; }

}  // namespace mvst
