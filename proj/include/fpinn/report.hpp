#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpinn/metrics.hpp"
#include "fpinn/optimize.hpp"
#include "fpinn/problem.hpp"

namespace fpinn {

inline constexpr const char* kVersion = "1.0.0";

// Everything a run needs; echoed verbatim into the report so a run can be
// reproduced from its artifacts.
struct RunConfig {
    int example = 0;          // 1..8, or 0 when problem_file is used
    std::string problem_file; // empty for builtin examples
    int n = 101;              // grid nodes (n - 1 intervals)
    double graded = 1.0;      // mesh grading exponent, 1 = uniform
    std::optional<double> alpha_override;
    double lambda = 10.0;
    LossConfig::Reduction reduction = LossConfig::Reduction::paper_l2_norm;
    int adam_epochs = 2000;
    int lbfgs_iters = 500;
    double learning_rate = 0.01;
    std::uint64_t seed = 1;
    bool deterministic = false;
    int threads = 1;
    bool use_history = true;
    int sample_points = kReportSamplePoints;
    std::string out_dir = "fpinn_out";
};

// Per-state evaluation against the closed form (when one exists).
struct StateReport {
    std::string name;
    bool has_exact = false;
    ErrorReport errors; // sample_points always filled; norms only with exact
};

struct Timings {
    double matrix_assembly = 0.0;
    double training_total = 0.0;
    double adam_mean = 0.0;  // seconds per epoch
    double lbfgs_mean = 0.0; // seconds per accepted step
};

struct RunReport {
    RunConfig config;
    std::string problem_name;
    TrainResult train;
    std::vector<StateReport> states;
    Timings timings;
};

// Shortest decimal round-trip text for CSV cells.
std::string format_double(double v);

// Applies the alpha override, builds the grid and objective from the config.
// Throws std::invalid_argument when the override leaves the problem with the
// wrong number of initial values or the config is out of range.
std::unique_ptr<Objective> make_objective(Problem problem, const RunConfig& config);

// Full solve pipeline: train with the configured schedule (Adam phase timed
// separately from L-BFGS), then sample and score every state. Deterministic
// up to wall-clock fields for a fixed config.
RunReport run_solve(Problem problem, const RunConfig& config);

// Writes report.txt, solution.csv, trace.csv and timings.csv under dir,
// creating it if needed. Returns the report path.
std::string write_run_artifacts(const RunReport& report, const std::string& dir);

// Samples the trained surrogate on an inclusive uniform grid of sample_count
// points and scores each state against its exact solution when available.
std::vector<StateReport> evaluate_states(const Problem& problem, const Objective& objective,
                                         std::span<const double> params, int sample_count);

// CSV schemas are frozen: solution.csv "x,state,predicted,exact,abs_error"
// (exact cells empty without a closed form), trace.csv "iteration,loss",
// timings.csv "name,seconds".
void write_solution_csv(std::ostream& os, const std::vector<StateReport>& states);
void write_trace_csv(std::ostream& os, const TrainResult& train);
void write_timings_csv(std::ostream& os, const Timings& timings);
void write_report_text(std::ostream& os, const RunReport& report);

} // namespace fpinn
