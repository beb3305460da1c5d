#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace fpinn {

// Per-epoch training cost of the pantograph benchmark (example 3) in its
// integer-order form against the same problem forced to order 0.5, where
// every epoch performs the dense weight-matrix products. Assembly is kept
// out of the epoch timings and reported once.
struct BenchRow {
    int nodes = 0;
    double integer_per_epoch = 0.0;   // seconds
    double fractional_per_epoch = 0.0;
    double ratio = 0.0;
    double assembly_seconds = 0.0;
    long long assembly_operations = 0;
};

BenchRow bench_epoch_cost(int nodes, int epochs, std::uint64_t seed, int threads = 1);

std::vector<BenchRow> run_bench(const std::vector<int>& node_counts, int epochs,
                                std::uint64_t seed, int threads = 1);

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);
void write_bench_report(std::ostream& os, const std::vector<BenchRow>& rows, double threshold);

} // namespace fpinn
