#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tbs/operator.hpp"
#include "tbs/pde.hpp"

namespace tbs {

/// Cartesian product of benchmark settings. Grid sizes are node counts per axis
/// of a box domain; the dimension is the number of entries.
struct BenchPlan {
    std::vector<std::vector<int>> grids{{64, 64, 64}};
    std::vector<int> degrees{3};
    std::vector<Strategy> strategies{Strategy::OnTheFly};
    std::vector<int> threads{1};
    std::vector<Precision> precisions{Precision::Double};
    int repetitions = 3;
    int warmup = 1;
    std::uint64_t seed = 1;
    double memory_budget = kDefaultMemoryBudget;

    /// Throws Configuration on empty axes or fewer than 3 repetitions, Resource when a
    /// block-tensor point exceeds the budget.
    void validate() const;
};

struct BenchResult {
    std::vector<int> grid;
    int degree = 3;
    Strategy strategy = Strategy::OnTheFly;
    int threads = 1;
    Precision precision = Precision::Double;
    double median_seconds = 0.0;
    double gflops = 0.0;  // analytic model flops / median time
    double bytes_read = 0.0;
    double bytes_written = 0.0;
    double storage_bytes = 0.0;
    double speedup = 1.0;  // vs the smallest thread count of the same point
    double checksum = 0.0;  // sum of outputs
    std::uint64_t hash = 0;  // FNV-1a of the output bytes
};

/// Times one operator application per point (median over repetitions after warmup).
/// Output hashes must agree bitwise across thread counts, else Determinism is thrown.
std::vector<BenchResult> run_bench(const BenchPlan& plan);

inline constexpr const char* kBenchCsvVersion = "tbs-bench-1";

/// Versioned CSV: first line "# tbs-bench-1", then a header and one row per result.
std::string bench_csv(const std::vector<BenchResult>& results);

/// Randomized form of the benchmark family: box grid, D in [0.5, 1.5], mu in [0, 1],
/// Robin faces. Deterministic in `seed`.
FormData bench_form(const Grid& grid, int degree, std::uint64_t seed);

std::uint64_t fnv1a(const void* data, std::size_t bytes);

/// Resident set size of this process from /proc/self/statm (0 if unavailable).
double resident_bytes();

}  // namespace tbs
