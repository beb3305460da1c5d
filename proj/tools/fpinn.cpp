#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"

#include "fpinn/bench.hpp"
#include "fpinn/problem.hpp"
#include "fpinn/report.hpp"
#include "fpinn/validate.hpp"

namespace {

// Exit codes: 0 success, 1 usage or configuration, 2 failed self-checks,
// 3 numerical failure (divergence).
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kValidationFailure = 2;
constexpr int kDivergence = 3;

int do_solve(int example, const std::string& problem_file, fpinn::RunConfig cfg,
             const std::string& loss, bool no_history) {
    if (example == 0 && problem_file.empty()) {
        std::cerr << "solve: pass --example N or --problem FILE\n";
        return kUsage;
    }
    fpinn::Problem problem;
    try {
        if (example > 0) {
            problem = fpinn::builtin_problem(example);
        } else {
            std::ifstream is(problem_file);
            if (!is) throw std::invalid_argument("cannot open " + problem_file);
            problem = fpinn::load_problem(is);
        }
    } catch (const std::exception& e) {
        std::cerr << "solve: " << e.what() << "\n";
        return kUsage;
    }

    cfg.example = example;
    cfg.problem_file = problem_file;
    cfg.reduction = loss == "mse" ? fpinn::LossConfig::Reduction::mean_square
                                  : fpinn::LossConfig::Reduction::paper_l2_norm;
    cfg.use_history = !no_history;
    if (cfg.deterministic) cfg.threads = 1;

    try {
        const fpinn::RunReport report = fpinn::run_solve(std::move(problem), cfg);
        const std::string path = fpinn::write_run_artifacts(report, cfg.out_dir);

        std::cout << "problem: " << report.problem_name << "\n";
        std::cout << "stop: " << report.train.stop_reason
                  << "  final loss: " << report.train.final_loss << "\n";
        for (const auto& state : report.states) {
            std::cout << "state " << state.name << ": ";
            if (state.has_exact)
                std::cout << "mae " << state.errors.mae << "  linf " << state.errors.linf << "\n";
            else
                std::cout << "no closed form, see solution.csv\n";
        }
        std::cout << "artifacts: " << path << " (+ solution.csv, trace.csv, timings.csv)\n";
        if (report.train.diverged) {
            std::cerr << "solve: training diverged, see " << path << "\n";
            return kDivergence;
        }
        return kOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "solve: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "solve: numerical failure: " << e.what() << "\n";
        return kDivergence;
    }
}

int do_validate(std::uint64_t seed) {
    const std::vector<fpinn::SuiteResult> results = fpinn::run_validation(seed);
    for (const auto& r : results)
        std::printf("%-40s %s  %s\n", r.name.c_str(), r.passed ? "pass" : "FAIL",
                    r.detail.c_str());
    if (fpinn::all_passed(results)) {
        std::printf("all %zu suites passed\n", results.size());
        return kOk;
    }
    std::printf("self-checks FAILED\n");
    return kValidationFailure;
}

int do_bench(const std::string& out_dir, std::uint64_t seed, int threads, int epochs) {
    const std::vector<int> nodes = {51, 101, 201, 401};
    const std::vector<fpinn::BenchRow> rows = fpinn::run_bench(nodes, epochs, seed, threads);
    fpinn::write_bench_report(std::cout, rows, 1.5);
    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        std::ofstream report(fs::path(out_dir) / "report.txt", std::ios::binary);
        fpinn::write_bench_report(report, rows, 1.5);
        std::ofstream csv(fs::path(out_dir) / "timings.csv", std::ios::binary);
        fpinn::write_bench_csv(csv, rows);
        std::cout << "artifacts: " << out_dir << "/report.txt, " << out_dir << "/timings.csv\n";
    }
    return kOk;
}

int do_template(const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << fpinn::problem_template_text();
        return kOk;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        std::cerr << "template: cannot write " << path << "\n";
        return kUsage;
    }
    os << fpinn::problem_template_text();
    std::cout << "wrote " << path << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"physics-informed neural solver for fractional delay and"
                 " differential-algebraic systems"};
    app.set_version_flag("--version", std::string("fpinn ") + fpinn::kVersion);
    app.require_subcommand(1);

    fpinn::RunConfig cfg;
    int example = 0;
    std::string problem_file, loss = "paper";
    bool no_history = false;

    CLI::App* solve = app.add_subcommand("solve", "train on a problem and write report + CSVs");
    CLI::Option* ex_opt = solve->add_option("--example", example, "builtin example id (1..8)")
                              ->envname("FPINN_EXAMPLE")
                              ->check(CLI::Range(1, fpinn::kBuiltinCount));
    CLI::Option* file_opt = solve->add_option("--problem", problem_file, "problem definition file")
                                ->envname("FPINN_PROBLEM");
    ex_opt->excludes(file_opt);
    solve->add_option("--n", cfg.n, "grid nodes (n-1 intervals)")
        ->envname("FPINN_N")
        ->check(CLI::Range(3, 200001))
        ->capture_default_str();
    solve->add_option("--graded", cfg.graded, "mesh grading exponent, 1 = uniform")
        ->envname("FPINN_GRADED")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    solve
        ->add_option("--alpha", cfg.alpha_override,
                     "override the derivative order (scalar problems: (0,2]; systems: (0,1))")
        ->envname("FPINN_ALPHA");
    solve->add_option("--lambda", cfg.lambda, "residual weight in the loss")
        ->envname("FPINN_LAMBDA")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    solve->add_option("--adam-epochs", cfg.adam_epochs, "first-phase epochs")
        ->envname("FPINN_ADAM_EPOCHS")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    solve->add_option("--lbfgs-iters", cfg.lbfgs_iters, "second-phase iterations")
        ->envname("FPINN_LBFGS_ITERS")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    solve->add_option("--lr", cfg.learning_rate, "Adam learning rate")
        ->envname("FPINN_LR")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    CLI::Option* seed_opt = solve->add_option("--seed", cfg.seed, "weight init seed")
                                ->envname("FPINN_SEED")
                                ->capture_default_str();
    solve->add_flag("--deterministic", cfg.deterministic,
                    "bit-reproducible run: forces --threads 1, requires an explicit --seed")
        ->envname("FPINN_DETERMINISTIC")
        ->needs(seed_opt);
    solve->add_option("--threads", cfg.threads, "worker threads (1 = deterministic path)")
        ->envname("FPINN_THREADS")
        ->check(CLI::Range(1, 512))
        ->capture_default_str();
    solve->add_option("--loss", loss, "residual reduction")
        ->envname("FPINN_LOSS")
        ->check(CLI::IsMember({"paper", "mse"}))
        ->capture_default_str();
    solve->add_flag("--no-history", no_history,
                    "evaluate the network below the domain instead of the history function")
        ->envname("FPINN_NO_HISTORY");
    solve->add_option("--samples", cfg.sample_points, "report sample points")
        ->envname("FPINN_SAMPLES")
        ->check(CLI::Range(2, 1000000))
        ->capture_default_str();
    solve->add_option("--out", cfg.out_dir, "artifact directory")
        ->envname("FPINN_OUT")
        ->capture_default_str();

    std::uint64_t validate_seed = 20260814;
    CLI::App* validate = app.add_subcommand("validate", "run the numerical self-check suites");
    validate->add_option("--seed", validate_seed, "randomized-suite seed")
        ->envname("FPINN_SEED")
        ->capture_default_str();

    std::string bench_out;
    std::uint64_t bench_seed = 1;
    int bench_threads = 1,
        bench_epochs = 1000; // matches the published per-epoch timing protocol
    CLI::App* bench =
        app.add_subcommand("bench", "per-epoch cost: fractional matrix vs integer baseline");
    bench->add_option("--out", bench_out, "artifact directory")->envname("FPINN_OUT");
    bench->add_option("--seed", bench_seed, "weight init seed")
        ->envname("FPINN_SEED")
        ->capture_default_str();
    bench->add_option("--threads", bench_threads, "worker threads")
        ->envname("FPINN_THREADS")
        ->check(CLI::Range(1, 512))
        ->capture_default_str();
    bench->add_option("--epochs", bench_epochs, "epochs per measurement")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    std::string template_path;
    CLI::App* tmpl =
        app.add_subcommand("template", "write a commented problem-definition example");
    tmpl->add_option("path", template_path, "output file ('-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (solve->parsed()) return do_solve(example, problem_file, cfg, loss, no_history);
    if (validate->parsed()) return do_validate(validate_seed);
    if (bench->parsed()) return do_bench(bench_out, bench_seed, bench_threads, bench_epochs);
    if (tmpl->parsed()) return do_template(template_path);
    return kUsage;
}
