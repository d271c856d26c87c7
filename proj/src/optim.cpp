#include "mvst/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mvst {

void AdamWState::init(const std::vector<Tensor>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
    }
}

void adamw_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads, AdamWState& state) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw TensorError("adamw_step: parameter, gradient and moment counts differ");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (grads[i].size() != params[i].size() || state.m[i].size() != params[i].size() ||
            state.v[i].size() != params[i].size())
            throw TensorError("adamw_step: shape mismatch for parameter " + std::to_string(i));

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i].mutable_data();
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            theta[j] -= state.lr * (m_hat / (std::sqrt(v_hat) + state.eps) + state.weight_decay * theta[j]);
        }
    }
}

void adamw_step(std::vector<Tensor>& params, AdamWState& state) {
    std::vector<std::vector<double>> grads;
    grads.reserve(params.size());
    for (const auto& p : params) grads.push_back(p.grad());
    adamw_step(params, grads, state);
}

double scheduled_lr(LrSchedule schedule, double base, std::uint64_t step, std::uint64_t total_steps) {
    if (schedule == LrSchedule::constant || total_steps <= 1) return base;
    const double floor = base / 100.0;
    const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps - 1));
    return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace mvst
