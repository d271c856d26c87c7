#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mvst/tensor.hpp"

namespace mvst {

struct GradCheckResult {
    double max_rel_error = 0.0;
    /// Probe and flat coordinate of the worst mismatch.
    std::size_t worst_probe = 0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
};

/// |a − n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// A tensor whose gradient is compared; empty `indices` means every entry.
struct GradProbe {
    Tensor tensor;
    std::vector<std::size_t> indices;
};

enum class FdScheme {
    /// (f(x+h) − f(x−h)) / 2h
    central,
    /// (4·D(h/2) − D(h)) / 3 over central differences D; fourth-order, so a
    /// larger h keeps round-off low without truncation error.
    richardson,
};

/// Finite differences of a scalar `loss` against the tape's gradient for
/// every probed coordinate. Probes must require gradients.
GradCheckResult grad_check(const std::function<Tensor()>& loss, std::vector<GradProbe> probes, double eps = 1e-5,
                           FdScheme scheme = FdScheme::central);

/// Single-input form: f maps x to a scalar.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-5,
                           FdScheme scheme = FdScheme::central);

}  // namespace mvst
