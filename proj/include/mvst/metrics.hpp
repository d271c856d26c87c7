#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace mvst {

/// rows = true class, cols = predicted; class 0 is Normal, 1..3 abnormal.
struct ConfusionMatrix {
    std::array<std::array<std::int64_t, 4>, 4> counts{};

    void add(int truth, int predicted);
    std::int64_t total() const noexcept;
    std::int64_t correct() const noexcept;
    double accuracy() const noexcept;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Specificity, sensitivity and their mean. The average is always derived,
/// never stored independently.
class Metrics {
public:
    Metrics(double sp, double se);

    double sp() const noexcept { return sp_; }
    double se() const noexcept { return se_; }
    double as_score() const noexcept { return (sp_ + se_) / 2.0; }

private:
    double sp_;
    double se_;
};

/// SP = normal recall; SE = correctly classified abnormal / all abnormal.
/// Throws std::domain_error when either group is empty.
Metrics compute_metrics(const ConfusionMatrix& cm);

/// "SP 81.99% SE 51.10% AS 66.55%"
std::string format_percent(const Metrics& m);

}  // namespace mvst
