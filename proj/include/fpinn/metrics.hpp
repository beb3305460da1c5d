#pragma once

#include <optional>
#include <span>
#include <vector>

namespace fpinn {

struct ErrorSample {
    double x = 0.0;
    double predicted = 0.0;
    double exact = 0.0;
};

// Norms of the pointwise error predicted - exact. relative_l2 is empty when
// the exact vector has zero norm (the metric is undefined there).
struct ErrorReport {
    double l1 = 0.0;
    double l2 = 0.0;
    double linf = 0.0;
    double mae = 0.0;
    std::optional<double> relative_l2;
    std::vector<ErrorSample> sample_points;
};

// Default number of evaluation points for solution reports.
inline constexpr int kReportSamplePoints = 300;

ErrorReport compute_errors(std::span<const double> predicted, std::span<const double> exact);

} // namespace fpinn
