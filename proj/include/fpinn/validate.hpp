#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fpinn {

// One self-check suite: a named property of the numerical kernels verified
// against an independent construction, with the measured figure in detail.
struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Every row of a differentiation matrix must map constants to zero. Entries
// are injected as a callable so the property (and its sensitivity to a
// corrupted weight) can be probed directly.
bool rows_telescope(int size, const std::function<double(int, int)>& entry, double rel_tol,
                    double* worst = nullptr);

// Runs the full self-check battery. Deterministic for a fixed seed.
std::vector<SuiteResult> run_validation(std::uint64_t seed = 20260814);

bool all_passed(const std::vector<SuiteResult>& results);

} // namespace fpinn
