#pragma once

#include <cstdint>
#include <vector>

#include "mvst/tensor.hpp"

namespace mvst {

struct AdamWState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    /// Allocates zeroed moments matching `params`.
    void init(const std::vector<Tensor>& params);
};

/// One decoupled-weight-decay Adam update:
///   θ ← θ − lr·(m̂/(√v̂+ε) + wd·θ)
void adamw_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads, AdamWState& state);

/// Same, reading each parameter's accumulated gradient (absent = zero).
void adamw_step(std::vector<Tensor>& params, AdamWState& state);

enum class LrSchedule { constant, cosine };

/// Learning rate for optimizer step `step` of `total_steps`. Cosine decays
/// from `base` to base/100.
double scheduled_lr(LrSchedule schedule, double base, std::uint64_t step, std::uint64_t total_steps);

}  // namespace mvst
