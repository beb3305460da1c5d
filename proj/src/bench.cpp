#include "fpinn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <variant>

#include "fpinn/optimize.hpp"
#include "fpinn/problem.hpp"
#include "fpinn/report.hpp"
#include "fpinn/residual.hpp"

namespace fpinn {

namespace {

double time_epochs(const Objective& objective, std::uint64_t seed, int epochs) {
    const std::vector<double> start = objective.initial_parameters(seed);
    TrainSchedule warmup;
    warmup.adam_epochs = std::min(10, epochs);
    warmup.lbfgs_iterations = 0;
    train(objective, start, warmup);

    TrainSchedule schedule;
    schedule.adam_epochs = epochs;
    schedule.lbfgs_iterations = 0;
    const auto t0 = std::chrono::steady_clock::now();
    train(objective, start, schedule);
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // the schedule evaluates once up front and once per epoch
    return total / (epochs + 1);
}

} // namespace

BenchRow bench_epoch_cost(int nodes, int epochs, std::uint64_t seed, int threads) {
    auto integer = std::get<FddeProblem>(builtin_problem(3));
    auto fractional = integer;
    fractional.order = FractionalOrder(0.5);

    const Grid grid = Grid::uniform(integer.lo, integer.hi, nodes - 1);
    const FddeObjective base(integer, grid, {}, threads);
    const FddeObjective frac(fractional, grid, {}, threads);

    BenchRow row;
    row.nodes = nodes;
    row.integer_per_epoch = time_epochs(base, seed, epochs);
    row.fractional_per_epoch = time_epochs(frac, seed, epochs);
    row.ratio = row.fractional_per_epoch / row.integer_per_epoch;
    row.assembly_seconds = frac.matrix_assembly_seconds();
    row.assembly_operations = CaputoMatrix(grid, 0.5, threads).assembly_operations();
    return row;
}

std::vector<BenchRow> run_bench(const std::vector<int>& node_counts, int epochs,
                                std::uint64_t seed, int threads) {
    std::vector<BenchRow> rows;
    rows.reserve(node_counts.size());
    for (int nodes : node_counts) rows.push_back(bench_epoch_cost(nodes, epochs, seed, threads));
    return rows;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
    os << "nodes,integer_per_epoch,fractional_per_epoch,ratio,assembly_seconds,"
          "assembly_operations\n";
    for (const auto& r : rows)
        os << r.nodes << ',' << format_double(r.integer_per_epoch) << ','
           << format_double(r.fractional_per_epoch) << ',' << format_double(r.ratio) << ','
           << format_double(r.assembly_seconds) << ',' << r.assembly_operations << '\n';
}

void write_bench_report(std::ostream& os, const std::vector<BenchRow>& rows, double threshold) {
    os << "fpinn " << kVersion << " bench report\n";
    os << "pantograph benchmark, per-epoch wall time, matrix assembly excluded\n\n";
    os << "nodes  integer s/epoch  fractional s/epoch  ratio   assembly s  assembly ops\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-6d %-16.3e %-19.3e %-7.3f %-11.3e %lld\n", r.nodes,
                      r.integer_per_epoch, r.fractional_per_epoch, r.ratio, r.assembly_seconds,
                      r.assembly_operations);
        os << line;
    }
    os << "\nthreshold: fractional/integer <= " << threshold << " per epoch\n";
    for (const auto& r : rows)
        os << "  nodes " << r.nodes << ": " << (r.ratio <= threshold ? "pass" : "FAIL") << " (ratio "
           << r.ratio << ")\n";
    if (rows.size() >= 2) {
        const auto& a = rows.front();
        const auto& b = rows.back();
        const double op_ratio =
            static_cast<double>(b.assembly_operations) / static_cast<double>(a.assembly_operations);
        const double size_ratio = static_cast<double>(b.nodes) / static_cast<double>(a.nodes);
        os << "assembly operation growth: " << op_ratio << "x for a " << size_ratio
           << "x grid (quadratic expected: " << size_ratio * size_ratio << "x)\n";
    }
}

} // namespace fpinn
