#include "fpinn/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace fpinn {

namespace {

std::string fmt(double v, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// Six significant digits for prose; full precision stays in the CSVs.
std::string brief(double v) { return fmt(v, "%.6g"); }

} // namespace

std::string format_double(double v) { return fmt(v, "%.17g"); }

std::unique_ptr<Objective> make_objective(Problem problem, const RunConfig& c) {
    if (c.n < 3) throw std::invalid_argument("config: need at least 3 grid nodes");
    if (c.graded <= 0.0) throw std::invalid_argument("config: grading exponent must be positive");
    if (c.sample_points < 2) throw std::invalid_argument("config: need at least 2 sample points");
    const int threads = c.deterministic ? 1 : std::max(1, c.threads);

    LossConfig loss;
    loss.lambda = c.lambda;
    loss.reduction = c.reduction;

    if (auto* fdde = std::get_if<FddeProblem>(&problem)) {
        if (c.alpha_override) {
            if (*c.alpha_override <= 0.0 || *c.alpha_override > 2.0)
                throw std::invalid_argument("config: order override must lie in (0, 2]");
            fdde->order = FractionalOrder(*c.alpha_override);
            if (static_cast<int>(fdde->initial_values.size()) !=
                fdde->order.initial_value_count())
                throw std::invalid_argument(
                    "config: order override requires " +
                    std::to_string(fdde->order.initial_value_count()) +
                    " initial value(s) but the problem defines " +
                    std::to_string(fdde->initial_values.size()));
        }
        const Grid grid = c.graded == 1.0
                              ? Grid::uniform(fdde->lo, fdde->hi, c.n - 1)
                              : Grid::graded(fdde->lo, fdde->hi, c.n - 1, c.graded);
        return std::make_unique<FddeObjective>(*fdde, grid, loss, threads, c.use_history);
    }

    auto& sys = std::get<DaeSystem>(problem);
    if (c.alpha_override) {
        if (*c.alpha_override <= 0.0 || *c.alpha_override >= 1.0)
            throw std::invalid_argument("config: system alpha override must lie in (0, 1)");
        sys.alpha = *c.alpha_override;
    }
    const Grid grid = c.graded == 1.0 ? Grid::uniform(sys.lo, sys.hi, c.n - 1)
                                      : Grid::graded(sys.lo, sys.hi, c.n - 1, c.graded);
    return std::make_unique<DaeObjective>(sys, grid, loss, threads);
}

RunReport run_solve(Problem problem, const RunConfig& config) {
    RunReport report;
    report.config = config;
    report.problem_name = std::visit([](const auto& p) { return p.name; }, problem);

    const std::unique_ptr<Objective> objective = make_objective(std::move(problem), config);
    const std::vector<double> start = objective->initial_parameters(config.seed);

    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };

    // Two phases timed separately; chaining them reproduces the single
    // combined schedule exactly because the second phase restarts cold.
    TrainSchedule adam_phase;
    adam_phase.adam_epochs = config.adam_epochs;
    adam_phase.lbfgs_iterations = 0;
    adam_phase.learning_rate = config.learning_rate;
    const auto t0 = clock::now();
    TrainResult first = train(*objective, start, adam_phase);
    const auto t1 = clock::now();

    TrainResult merged = std::move(first);
    double lbfgs_seconds = 0.0;
    const bool continue_lbfgs = config.lbfgs_iters > 0 && !merged.diverged &&
                                !merged.converged && !merged.line_search_failed;
    if (continue_lbfgs) {
        TrainSchedule lbfgs_phase;
        lbfgs_phase.adam_epochs = 0;
        lbfgs_phase.lbfgs_iterations = config.lbfgs_iters;
        lbfgs_phase.learning_rate = config.learning_rate;
        const auto t2 = clock::now();
        TrainResult second = train(*objective, merged.parameters, lbfgs_phase);
        lbfgs_seconds = seconds(t2, clock::now());

        merged.parameters = std::move(second.parameters);
        // the second trace re-evaluates the handoff point; drop the duplicate
        merged.loss_trace.insert(merged.loss_trace.end(), second.loss_trace.begin() + 1,
                                 second.loss_trace.end());
        merged.final_loss = second.final_loss;
        merged.final_gradient_norm = second.final_gradient_norm;
        merged.lbfgs_steps = second.lbfgs_steps;
        merged.converged = second.converged;
        merged.diverged = second.diverged;
        merged.line_search_failed = second.line_search_failed;
        merged.stop_reason = second.stop_reason;
    }

    report.timings.matrix_assembly = objective->matrix_assembly_seconds();
    report.timings.training_total = seconds(t0, clock::now());
    report.timings.adam_mean =
        merged.adam_steps > 0 ? seconds(t0, t1) / merged.adam_steps : 0.0;
    report.timings.lbfgs_mean =
        merged.lbfgs_steps > 0 ? lbfgs_seconds / merged.lbfgs_steps : 0.0;

    Problem scored;
    if (const auto* f = dynamic_cast<const FddeObjective*>(objective.get()))
        scored = f->problem();
    else
        scored = dynamic_cast<const DaeObjective&>(*objective).system();
    report.states =
        evaluate_states(scored, *objective, merged.parameters, config.sample_points);
    report.train = std::move(merged);
    return report;
}

std::string write_run_artifacts(const RunReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream os(fs::path(dir) / name, std::ios::binary);
        if (!os) throw std::runtime_error(std::string("cannot write ") + name + " under " + dir);
        return os;
    };
    {
        auto os = open("report.txt");
        write_report_text(os, report);
    }
    {
        auto os = open("solution.csv");
        write_solution_csv(os, report.states);
    }
    {
        auto os = open("trace.csv");
        write_trace_csv(os, report.train);
    }
    {
        auto os = open("timings.csv");
        write_timings_csv(os, report.timings);
    }
    return (fs::path(dir) / "report.txt").string();
}

std::vector<StateReport> evaluate_states(const Problem& problem, const Objective& objective,
                                         std::span<const double> params, int sample_count) {
    if (sample_count < 2) throw std::invalid_argument("evaluate_states: need at least 2 samples");

    double lo = 0.0, hi = 1.0;
    std::vector<std::string> names;
    std::vector<const Expression*> exact;
    if (const auto* fdde = std::get_if<FddeProblem>(&problem)) {
        lo = fdde->lo;
        hi = fdde->hi;
        names.push_back("y");
        exact.push_back(fdde->exact ? &*fdde->exact : nullptr);
    } else {
        const auto& sys = std::get<DaeSystem>(problem);
        lo = sys.lo;
        hi = sys.hi;
        for (int k = 0; k < sys.m; ++k) {
            names.push_back("y" + std::to_string(k + 1));
            exact.push_back(sys.exact.empty() ? nullptr : &sys.exact[k]);
        }
    }
    const int m = static_cast<int>(names.size());
    if (m != objective.state_count())
        throw std::invalid_argument("evaluate_states: problem does not match objective");

    std::vector<StateReport> out(m);
    for (int k = 0; k < m; ++k) {
        out[k].name = names[k];
        out[k].has_exact = exact[k] != nullptr;
        out[k].errors.sample_points.reserve(sample_count);
    }

    std::vector<std::vector<double>> predicted(m), truth(m);
    for (int i = 0; i < sample_count; ++i) {
        const double x = lo + (hi - lo) * i / (sample_count - 1);
        const std::vector<double> values = objective.predict(params, x);
        for (int k = 0; k < m; ++k) {
            ErrorSample s;
            s.x = x;
            s.predicted = values[k];
            s.exact = exact[k] ? exact[k]->eval(x) : std::numeric_limits<double>::quiet_NaN();
            out[k].errors.sample_points.push_back(s);
            if (exact[k]) {
                predicted[k].push_back(s.predicted);
                truth[k].push_back(s.exact);
            }
        }
    }

    for (int k = 0; k < m; ++k) {
        if (!out[k].has_exact) continue;
        auto samples = std::move(out[k].errors.sample_points);
        out[k].errors = compute_errors(predicted[k], truth[k]);
        out[k].errors.sample_points = std::move(samples);
    }
    return out;
}

void write_solution_csv(std::ostream& os, const std::vector<StateReport>& states) {
    os << "x,state,predicted,exact,abs_error\n";
    for (const auto& state : states) {
        for (const auto& s : state.errors.sample_points) {
            os << format_double(s.x) << ',' << state.name << ',' << format_double(s.predicted);
            if (state.has_exact)
                os << ',' << format_double(s.exact) << ','
                   << format_double(std::abs(s.predicted - s.exact));
            else
                os << ",,";
            os << '\n';
        }
    }
}

void write_trace_csv(std::ostream& os, const TrainResult& train) {
    os << "iteration,loss\n";
    for (std::size_t i = 0; i < train.loss_trace.size(); ++i)
        os << i << ',' << format_double(train.loss_trace[i]) << '\n';
}

void write_timings_csv(std::ostream& os, const Timings& t) {
    os << "name,seconds\n";
    os << "matrix_assembly," << format_double(t.matrix_assembly) << '\n';
    os << "training_total," << format_double(t.training_total) << '\n';
    os << "adam_mean_per_epoch," << format_double(t.adam_mean) << '\n';
    os << "lbfgs_mean_per_step," << format_double(t.lbfgs_mean) << '\n';
}

void write_report_text(std::ostream& os, const RunReport& r) {
    const RunConfig& c = r.config;
    os << "fpinn " << kVersion << " solve report\n";
    os << "problem: ";
    if (c.example > 0)
        os << "example " << c.example;
    else
        os << c.problem_file;
    os << " (" << r.problem_name << ")\n";
    os << "grid: " << c.n << " nodes, grading " << brief(c.graded) << "\n";
    if (c.alpha_override) os << "alpha override: " << brief(*c.alpha_override) << "\n";
    os << "loss: "
       << (c.reduction == LossConfig::Reduction::paper_l2_norm ? "paper_l2_norm" : "mean_square")
       << ", lambda " << brief(c.lambda) << "\n";
    os << "schedule: adam " << c.adam_epochs << " @ lr " << brief(c.learning_rate) << ", lbfgs "
       << c.lbfgs_iters << "\n";
    os << "seed: " << c.seed << ", threads: " << c.threads << ", deterministic: "
       << (c.deterministic ? "yes" : "no") << ", history: " << (c.use_history ? "on" : "off")
       << "\n";
    os << "\n";
    os << "stop reason: " << r.train.stop_reason << "\n";
    os << "steps: adam " << r.train.adam_steps << ", lbfgs " << r.train.lbfgs_steps << "\n";
    os << "final loss: " << format_double(r.train.final_loss) << "\n";
    os << "final gradient norm: " << format_double(r.train.final_gradient_norm) << "\n";

    os << "\nloss trace (first, every 100th, last):\n";
    const auto& trace = r.train.loss_trace;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (i == 0 || i + 1 == trace.size() || i % 100 == 0)
            os << "  " << i << ": " << brief(trace[i]) << "\n";
    }

    for (const auto& state : r.states) {
        os << "\nstate " << state.name << " (" << state.errors.sample_points.size()
           << " sample points)\n";
        if (state.has_exact) {
            const ErrorReport& e = state.errors;
            os << "  l1 " << brief(e.l1) << "  l2 " << brief(e.l2) << "  linf " << brief(e.linf)
               << "  mae " << brief(e.mae);
            if (e.relative_l2) os << "  rel_l2 " << brief(*e.relative_l2);
            os << "\n";
        } else {
            os << "  no closed-form solution; error norms omitted\n";
        }
        const auto& samples = state.errors.sample_points;
        const std::size_t step = samples.size() > 10 ? (samples.size() - 1) / 10 : 1;
        os << "  x            predicted";
        if (state.has_exact) os << "        exact            abs_error";
        os << "\n";
        auto row = [&](std::size_t i) {
            const auto& s = samples[i];
            os << "  " << fmt(s.x, "%-12.6g") << " " << fmt(s.predicted, "%-16.10g");
            if (state.has_exact)
                os << " " << fmt(s.exact, "%-16.10g") << " "
                   << brief(std::abs(s.predicted - s.exact));
            os << "\n";
        };
        std::size_t last_shown = 0;
        for (std::size_t i = 0; i < samples.size(); i += step) {
            row(i);
            last_shown = i;
        }
        if (last_shown + 1 != samples.size()) row(samples.size() - 1);
    }

    os << "\ntimings (wall clock, not reproducible across runs):\n";
    os << "  matrix assembly: " << brief(r.timings.matrix_assembly) << " s\n";
    os << "  training total:  " << brief(r.timings.training_total) << " s\n";
    os << "  adam mean:       " << brief(r.timings.adam_mean * 1e3) << " ms/epoch\n";
    os << "  lbfgs mean:      " << brief(r.timings.lbfgs_mean * 1e3) << " ms/step\n";
}

} // namespace fpinn
