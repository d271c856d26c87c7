#pragma once

// The complete classifier: per-view encoders, gated fusion, MLP head.

#include <cstdint>
#include <vector>

#include "mvst/fusion.hpp"
#include "mvst/matrix.hpp"
#include "mvst/model.hpp"

namespace mvst {

struct NetworkConfig {
    model::ModelConfig model;
    fusion::GateMode gate_mode = fusion::GateMode::per_view;
    int classes = 4;
    double init_std = 0.02;

    void validate() const;
};

class Network {
public:
    Network(NetworkConfig config, std::uint64_t seed);

    const NetworkConfig& config() const noexcept { return config_; }

    /// Stable order: views ascending, then gates, then head.
    model::NamedTensors named_parameters() const;
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;
    void zero_grad();

    struct Trace {
        std::vector<Tensor> features;
        std::vector<Tensor> gates;
        Tensor fused;
        Tensor logits;
    };

    /// Logits [1×classes] for one spectrogram.
    Tensor forward(const Matrix& mel, Rng* dropout_rng = nullptr) const;
    Trace forward_trace(const Matrix& mel, Rng* dropout_rng = nullptr) const;

    std::vector<model::ViewParams>& views() noexcept { return views_; }
    const std::vector<model::ViewParams>& views() const noexcept { return views_; }
    fusion::GateParams& gates() noexcept { return gates_; }
    fusion::ClassifierParams& head() noexcept { return head_; }

private:
    NetworkConfig config_;
    std::vector<model::ViewParams> views_;
    fusion::GateParams gates_;
    fusion::ClassifierParams head_;
};

}  // namespace mvst
