#pragma once

// Gated fusion of per-view feature maps and the classifier head.

#include <cstdint>
#include <vector>

#include "mvst/model.hpp"
#include "mvst/tensor.hpp"

namespace mvst::fusion {

enum class GateMode {
    /// G^i = σ(F^i · W^iᵀ), one gate per view.
    per_view,
    /// G = σ(Σ_i F^i · W^iᵀ), shared by every view.
    shared_sum,
};

struct GateParams {
    std::vector<Tensor> w;  // d_T × d_T per active view
};

struct ClassifierParams {
    Tensor fc1_w, fc1_b;  // d_T × d_T
    Tensor fc2_w, fc2_b;  // d_T × classes
};

GateParams init_gates(const std::vector<int>& levels, std::size_t d_t, std::uint64_t seed, double init_std = 0.02);
ClassifierParams init_classifier(std::size_t d_t, std::size_t classes, std::uint64_t seed, double init_std = 0.02);
void append_named(const GateParams& gates, const std::vector<int>& levels, model::NamedTensors& out);
void append_named(const ClassifierParams& head, model::NamedTensors& out);

std::vector<Tensor> gate_coefficients(const std::vector<Tensor>& features, const GateParams& gates, GateMode mode);

/// Σ_i G^i ⊙ F^i
Tensor fuse(const std::vector<Tensor>& features, const std::vector<Tensor>& gates);

/// Mean-pool the fused tokens, then fc1 → GELU → fc2. Returns [1×classes].
Tensor classify(const Tensor& fused, const ClassifierParams& head);

}  // namespace mvst::fusion
