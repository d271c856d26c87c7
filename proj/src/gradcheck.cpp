#include "mvst/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mvst {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::function<Tensor()>& loss, std::vector<GradProbe> probes, double eps,
                           FdScheme scheme) {
    clear_tape();
    for (auto& p : probes) {
        if (!p.tensor.requires_grad()) throw TensorError("grad_check: probe does not require gradients");
        p.tensor.zero_grad();
        if (p.indices.empty()) {
            p.indices.resize(p.tensor.size());
            std::iota(p.indices.begin(), p.indices.end(), std::size_t{0});
        }
    }
    backward(loss());

    GradCheckResult result;
    NoGradGuard no_grad;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        auto& probe = probes[k];
        const auto analytic = probe.tensor.grad();
        auto values = probe.tensor.mutable_data();
        for (auto idx : probe.indices) {
            const double saved = values[idx];
            const auto central = [&](double h) {
                values[idx] = saved + h;
                const double plus = loss().item();
                values[idx] = saved - h;
                const double minus = loss().item();
                values[idx] = saved;
                return (plus - minus) / (2.0 * h);
            };
            const double numeric =
                scheme == FdScheme::central ? central(eps) : (4.0 * central(eps / 2.0) - central(eps)) / 3.0;
            const double err = relative_error(analytic[idx], numeric);
            ++result.checked;
            if (err > result.max_rel_error || result.checked == 1) {
                result.max_rel_error = err;
                result.worst_probe = k;
                result.worst_index = idx;
                result.analytic = analytic[idx];
                result.numeric = numeric;
            }
        }
    }
    return result;
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps, FdScheme scheme) {
    return grad_check([&] { return f(x); }, {GradProbe{x, {}}}, eps, scheme);
}

}  // namespace mvst
