#include "tbs/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <unistd.h>

namespace tbs {

namespace {

Grid bench_grid(const std::vector<int>& n) {
    if (n.empty() || n.size() > kMaxDim) throw Error(ErrorKind::Configuration, "bench grid needs 1 to 3 axes");
    std::array<int, kMaxDim> nodes{1, 1, 1};
    for (std::size_t a = 0; a < n.size(); ++a) nodes[a] = n[a];
    const double h = 1.0 / std::max(1, *std::max_element(n.begin(), n.end()) - 1);
    return Grid(static_cast<int>(n.size()), nodes, {h, h, h});
}

template <typename Scalar>
double median_apply(const SystemOperator<Scalar>& op, const typename SystemOperator<Scalar>::Vector& c,
                    typename SystemOperator<Scalar>::Vector& t, int warmup, int reps) {
    for (int i = 0; i < warmup; ++i) op.apply(c, t);
    std::vector<double> times;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        op.apply(c, t);
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t m = times.size() / 2;
    return times.size() % 2 ? times[m] : 0.5 * (times[m - 1] + times[m]);
}

template <typename Scalar>
void bench_point(const BenchPlan& plan, const std::vector<int>& grid, int degree, Strategy strategy,
                 Precision precision, std::vector<BenchResult>& out) {
    const FormData form = bench_form(bench_grid(grid), degree, plan.seed);
    const auto op = make_operator<Scalar>(strategy, form, plan.memory_budget);
    using Vector = typename SystemOperator<Scalar>::Vector;
    std::mt19937_64 rng(plan.seed + 7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector c(op->size());
    for (Index i = 0; i < c.size(); ++i) c[i] = static_cast<Scalar>(u(rng));
    const OpStats stats = op->stats();
    std::vector<int> threads = plan.threads;
    std::sort(threads.begin(), threads.end());
    const std::size_t first = out.size();
    for (int nt : threads) {
        op->set_threads(nt);
        Vector t;
        BenchResult r;
        r.grid = grid;
        r.degree = degree;
        r.strategy = strategy;
        r.threads = nt;
        r.precision = precision;
        r.median_seconds = median_apply(*op, c, t, plan.warmup, plan.repetitions);
        r.gflops = stats.flops / r.median_seconds * 1e-9;
        r.bytes_read = stats.bytes_read;
        r.bytes_written = stats.bytes_written;
        r.storage_bytes = op->storage_bytes();
        r.checksum = t.template cast<double>().sum();
        r.hash = fnv1a(t.data(), static_cast<std::size_t>(t.size()) * sizeof(Scalar));
        if (out.size() > first && r.hash != out[first].hash) {
            throw Error(ErrorKind::Determinism, "output of " + std::string(to_string(strategy)) + " n=" +
                                                    std::to_string(degree) + " differs between " +
                                                    std::to_string(out[first].threads) + " and " +
                                                    std::to_string(nt) + " threads");
        }
        r.speedup = out.size() > first ? out[first].median_seconds / r.median_seconds : 1.0;
        out.push_back(r);
    }
}

}  // namespace

void BenchPlan::validate() const {
    if (grids.empty() || degrees.empty() || strategies.empty() || threads.empty() || precisions.empty()) {
        throw Error(ErrorKind::Configuration, "bench plan has an empty axis");
    }
    if (repetitions < 3) throw Error(ErrorKind::Configuration, "bench needs at least 3 repetitions");
    if (warmup < 0) throw Error(ErrorKind::Configuration, "warmup count must be non-negative");
    for (int t : threads)
        if (t < 1) throw Error(ErrorKind::Configuration, "thread counts must be positive");
    for (const auto& g : grids) {
        const Grid grid = bench_grid(g);
        grid.validate();
        for (int n : degrees) {
            check_degree(n);
            for (Strategy s : strategies) {
                if (s != Strategy::BlockTensor) continue;
                const FormData probe{Domain::box(grid), n, n, constant_field(grid, n, 1.0), constant_field(grid, n, 0.0),
                                     SurfaceModel{}};
                if (BlockTensorOperator<double>::required_bytes(probe) > memory_budget) {
                    throw Error(ErrorKind::Resource, "block tensor for grid " + to_string(grid.node_extents()) +
                                                         " n=" + std::to_string(n) + " exceeds the memory budget");
                }
            }
        }
    }
}

std::vector<BenchResult> run_bench(const BenchPlan& plan) {
    plan.validate();
    std::vector<BenchResult> out;
    for (const auto& g : plan.grids)
        for (int n : plan.degrees)
            for (Strategy s : plan.strategies)
                for (Precision p : plan.precisions) {
                    if (p == Precision::Single) {
                        bench_point<float>(plan, g, n, s, p, out);
                    } else {
                        bench_point<double>(plan, g, n, s, p, out);
                    }
                }
    return out;
}

std::string bench_csv(const std::vector<BenchResult>& results) {
    std::ostringstream os;
    os << "# " << kBenchCsvVersion << '\n';
    os << "grid,degree,strategy,precision,threads,median_s,gflops,bytes_read,bytes_written,storage_bytes,speedup,"
          "checksum,hash\n";
    for (const auto& r : results) {
        for (std::size_t a = 0; a < r.grid.size(); ++a) os << (a ? "x" : "") << r.grid[a];
        os << ',' << r.degree << ',' << to_string(r.strategy) << ',' << to_string(r.precision) << ',' << r.threads
           << ',' << std::setprecision(6) << r.median_seconds << ',' << r.gflops << ',' << std::setprecision(12)
           << r.bytes_read << ',' << r.bytes_written << ',' << r.storage_bytes << ',' << std::setprecision(6)
           << r.speedup << ',' << std::setprecision(17) << r.checksum << ',' << std::hex << std::setw(16)
           << std::setfill('0') << r.hash << std::dec << std::setfill(' ') << '\n';
    }
    return os.str();
}

FormData bench_form(const Grid& grid, int degree, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.5, 1.5), m(0.0, 1.0);
    SplineField df = constant_field(grid, degree, 0.0), mf = constant_field(grid, degree, 0.0);
    for (Index i = 0; i < df.coeffs.size(); ++i) df.coeffs.data[i] = d(rng);
    for (Index i = 0; i < mf.coeffs.size(); ++i) mf.coeffs.data[i] = m(rng);
    SurfaceModel surface = SurfaceModel::uniform({0.5, 0.0});
    for (int a = 0; a < grid.dim; ++a) surface.edge[a] = {FaceCoefficients{0.5, 0.0}, FaceCoefficients{0.5, 0.0}};
    return FormData{Domain::box(grid), degree, degree, std::move(df), std::move(mf), surface};
}

std::uint64_t fnv1a(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

double resident_bytes() {
    std::ifstream in("/proc/self/statm");
    long pages = 0, resident = 0;
    if (!(in >> pages >> resident)) return 0.0;
    return static_cast<double>(resident) * static_cast<double>(sysconf(_SC_PAGESIZE));
}

}  // namespace tbs
