#include "mvst/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace mvst {

void ConfusionMatrix::add(int truth, int predicted) {
    if (truth < 0 || truth > 3 || predicted < 0 || predicted > 3)
        throw std::out_of_range("confusion matrix class index out of range");
    ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
}

std::int64_t ConfusionMatrix::total() const noexcept {
    std::int64_t n = 0;
    for (const auto& row : counts)
        for (auto c : row) n += c;
    return n;
}

std::int64_t ConfusionMatrix::correct() const noexcept {
    std::int64_t n = 0;
    for (std::size_t k = 0; k < 4; ++k) n += counts[k][k];
    return n;
}

double ConfusionMatrix::accuracy() const noexcept {
    const auto n = total();
    return n > 0 ? static_cast<double>(correct()) / static_cast<double>(n) : 0.0;
}

Metrics::Metrics(double sp, double se) : sp_(sp), se_(se) {
    if (!(sp >= 0.0 && sp <= 1.0 && se >= 0.0 && se <= 1.0))
        throw std::domain_error("specificity and sensitivity must lie in [0, 1]");
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
    std::int64_t normal = 0, abnormal = 0, abnormal_hit = 0;
    for (std::size_t c = 0; c < 4; ++c) normal += cm.counts[0][c];
    for (std::size_t k = 1; k < 4; ++k) {
        for (std::size_t c = 0; c < 4; ++c) abnormal += cm.counts[k][c];
        abnormal_hit += cm.counts[k][k];
    }
    if (normal == 0) throw std::domain_error("no normal samples: specificity undefined");
    if (abnormal == 0) throw std::domain_error("no abnormal samples: sensitivity undefined");
    return Metrics(static_cast<double>(cm.counts[0][0]) / static_cast<double>(normal),
                   static_cast<double>(abnormal_hit) / static_cast<double>(abnormal));
}

std::string format_percent(const Metrics& m) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "SP %.2f%% SE %.2f%% AS %.2f%%", 100.0 * m.sp(), 100.0 * m.se(),
                  100.0 * m.as_score());
    return buf;
}

}  // namespace mvst
