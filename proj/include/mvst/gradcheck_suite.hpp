#pragma once

// Finite-difference verification of every differentiable op and of a tiny
// end-to-end network.

#include <cstdint>
#include <string>
#include <vector>

namespace mvst {

struct SuiteEntry {
    std::string op;
    int seeds = 0;
    std::size_t checked = 0;
    double max_rel_error = 0.0;
    double threshold = 0.0;
    bool passed() const noexcept { return checked > 0 && max_rel_error < threshold; }
};

/// Names covered by run_op_suite, in report order.
std::vector<std::string> differentiable_ops();

/// Each op on `seeds` randomized problems derived from `seed`. Losses are
/// random projections Σ R⊙f(x) so gradients are O(1).
std::vector<SuiteEntry> run_op_suite(std::uint64_t seed, int seeds = 5, double threshold = 1e-5);

/// Tiny MVST (N=32, d=16, one block, two heads, views 0..2); compares the
/// cross-entropy gradient at `coordinates` random parameter entries.
SuiteEntry run_end_to_end_check(std::uint64_t seed, int coordinates = 25, double threshold = 1e-4);

}  // namespace mvst
