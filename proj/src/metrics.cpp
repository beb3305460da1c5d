#include "fpinn/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace fpinn {

ErrorReport compute_errors(std::span<const double> predicted, std::span<const double> exact)
{
    if (predicted.size() != exact.size())
        throw std::invalid_argument("metrics: vector length mismatch");
    if (predicted.empty())
        throw std::invalid_argument("metrics: empty vectors");

    ErrorReport report;
    double ss = 0.0, exact_ss = 0.0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        const double e = std::abs(predicted[i] - exact[i]);
        report.l1 += e;
        ss += e * e;
        report.linf = std::max(report.linf, e);
        exact_ss += exact[i] * exact[i];
    }
    report.l2 = std::sqrt(ss);
    report.mae = report.l1 / static_cast<double>(predicted.size());
    if (exact_ss > 0.0)
        report.relative_l2 = report.l2 / std::sqrt(exact_ss);
    return report;
}

} // namespace fpinn
