// Command-line front end: solve, convergence, bench, transform, kernels.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "tbs/bspline.hpp"
#include "tbs/io.hpp"
#include "tbs/kernels.hpp"
#include "tbs/parallel.hpp"

namespace fs = std::filesystem;
using namespace tbs;

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2, kNumerical = 3 };

struct Globals {
    std::optional<int> threads;
    std::optional<std::string> precision;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
};

std::string out_path(const Globals& g, const std::string& name) {
    const fs::path p(name);
    if (p.is_absolute()) return name;
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / p).string();
}

std::string fmt(double v, int digits = 17) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

int run_solve(const Globals& g, const std::string& file) {
    ProblemFile pf = read_problem(file);
    if (g.precision) pf.spec.precision = parse_precision(*g.precision);
    if (!g.threads && pf.threads > 0) set_default_threads(pf.threads);

    const ProblemSolution sol = solve_problem(pf.spec, pf.solver);
    const SolveReport& r = sol.report;
    write_tbsf(out_path(g, pf.output.solution), sol.node_samples);

    const NodeClassification& nc = sol.nodes;
    const double split = nc.active() ? static_cast<double>(nc.boundary) / static_cast<double>(nc.active()) : 0.0;
    std::ostringstream os;
    os << "key,value\n"
       << "strategy," << to_string(pf.spec.strategy) << '\n'
       << "precision," << to_string(pf.spec.precision) << '\n'
       << "degree," << pf.spec.nb << '\n'
       << "unknowns," << nc.active() << '\n'
       << "interior_nodes," << nc.interior << '\n'
       << "truncated_nodes," << nc.truncated << '\n'
       << "boundary_nodes," << nc.boundary << '\n'
       << "dropped_nodes," << nc.dropped << '\n'
       << "domain_kernel_fraction," << fmt(1.0 - split) << '\n'
       << "boundary_kernel_fraction," << fmt(split) << '\n'
       << "iterations," << r.iterations << '\n'
       << "coarse_iterations," << r.coarse_iterations << '\n'
       << "converged," << (r.converged ? 1 : 0) << '\n'
       << "relative_residual," << fmt(r.relative_residual) << '\n'
       << "assemble_seconds," << fmt(sol.assemble_seconds) << '\n'
       << "solve_seconds," << fmt(r.seconds) << '\n'
       << "clamped_diffusion," << sol.clamped_d << '\n'
       << "clamped_absorption," << sol.clamped_mu << '\n';
    for (std::size_t i = 0; i < r.residual_history.size(); ++i)
        os << "residual_" << i << ',' << fmt(r.residual_history[i]) << '\n';
    write_text_atomic(out_path(g, pf.output.report), os.str());
    if (!pf.output.vtk.empty()) export_vtk(out_path(g, pf.output.vtk), pf.spec.domain.grid(), {{"phi", &sol.node_samples}});

    for (const auto& note : r.notes) std::cerr << "note: " << note << '\n';
    std::cout << "iterations " << r.iterations << ", relative residual " << r.relative_residual << ", boundary kernels "
              << 100.0 * split << "%\n";
    if (!r.converged) {
        std::cerr << "error: solver did not reach tolerance " << pf.solver.tol << '\n';
        return kNumerical;
    }
    return kOk;
}

int run_convergence_cmd(const Globals& g, const std::string& file, std::string csv_name) {
    const StudyFile s = read_study(file);
    const ConvergenceStudy study = run_convergence(s.family, s.degrees, s.levels, s.options);
    if (csv_name.empty()) csv_name = fs::path(file).stem().string() + ".csv";
    const std::string csv = out_path(g, csv_name);
    write_text_atomic(csv, to_csv(study));
    if (s.gnuplot) write_text_atomic(fs::path(csv).replace_extension(".gp").string(), gnuplot_script(study, csv));
    for (const auto& c : study.curves)
        std::cout << "n=" << c.degree << "  l2 order " << c.l2_order << "  h1 order " << c.h1_order << '\n';
    for (const auto& note : study.notes) std::cerr << "note: " << note << '\n';
    return kOk;
}

int run_bench_cmd(const Globals& g, const std::string& plan_file, const std::string& csv_name) {
    BenchPlan plan = read_bench_plan(plan_file);
    if (g.precision) plan.precisions = {parse_precision(*g.precision)};
    if (g.seed) plan.seed = *g.seed;
    const std::string csv = bench_csv(run_bench(plan));
    write_text_atomic(out_path(g, csv_name), csv);
    std::cout << csv;
    return kOk;
}

int run_transform(const std::string& in, const std::string& out, int degree, const std::string& direction,
                  const std::string& extension) {
    const RawTensor raw = read_tbsf(in);
    const Extents& e = raw.tensor.extents;
    if (direction == "direct") {
        const BSplineBasis basis(degree, e.dim, {1.0, 1.0, 1.0});
        write_tbsf(out, direct_transform(raw.tensor, basis, parse_extension(extension)), raw.dtype, degree);
        return kOk;
    }
    const int n = raw.degree >= 0 ? raw.degree : degree;
    const BSplineBasis basis(n, e.dim, {1.0, 1.0, 1.0});
    std::vector<std::array<double, kMaxDim>> points;
    points.reserve(static_cast<std::size_t>(e.size()));
    for (int i = 0; i < e.n[0]; ++i)
        for (int j = 0; j < e.n[1]; ++j)
            for (int k = 0; k < e.n[2]; ++k) points.push_back({double(i), double(j), double(k)});
    const std::vector<double> values = indirect_transform(raw.tensor, basis, points);
    CoeffTensor samples(e);
    for (Index i = 0; i < e.size(); ++i) samples.data[i] = values[static_cast<std::size_t>(i)];
    write_tbsf(out, samples, raw.dtype);
    return kOk;
}

int run_kernels(int nb, std::optional<int> np, int da, int db) {
    // Trilinear entries first, then the bilinear kernel (the trilinear one summed over the
    // parameter offset, since the parameter splines sum to one). Quadrature leaves a few ulps,
    // so print 15 digits.
    const UnivariateTrilinearKernel k = trilinear_kernel(nb, np.value_or(nb), da, db);
    const UnivariateBilinearKernel b = bilinear_kernel(nb, nb, da, db);
    std::cout << "kernel,dk,dm,value\n";
    for (int dk = -k.k_radius; dk <= k.k_radius; ++dk)
        for (int dm = -k.m_radius; dm <= k.m_radius; ++dm)
            std::cout << "trilinear," << dk << ',' << dm << ',' << fmt(k(dk, dm), 15) << '\n';
    for (int dk = -b.radius; dk <= b.radius; ++dk) std::cout << "bilinear," << dk << ",," << fmt(b(dk), 15) << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor B-spline Galerkin solver for elliptic PDEs on uniform grids"};
    app.require_subcommand(1);
    app.footer("\nExit codes: 0 success, 1 usage, 2 runtime error, 3 numerical failure.\n\n" + config_reference());

    Globals g;
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: TBS_THREADS, else all cores)")
        ->envname("TBS_THREADS")
        ->check(CLI::PositiveNumber);
    std::string precision;
    app.add_option("--precision", precision, "Override the operator precision")
        ->check(CLI::IsMember({"single", "double"}));
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Benchmark seed");
    app.add_option("--out-dir", g.out_dir, "Directory for relative output paths");

    std::string input, output, csv_name, bench_csv_name = "bench.csv", direction = "direct", extension = "mirror";
    int degree = 3, nb = 3, da = 0, db = 0, np = -1;

    auto* solve = app.add_subcommand("solve", "Solve a problem file");
    solve->add_option("problem", input, "Problem file")->required()->check(CLI::ExistingFile);

    auto* conv = app.add_subcommand("convergence", "Run a convergence study");
    conv->add_option("study", input, "Study file")->required()->check(CLI::ExistingFile);
    conv->add_option("--csv", csv_name, "Output CSV (default: <study>.csv)");

    auto* bench = app.add_subcommand("bench", "Time operator applications");
    bench->add_option("--plan", input, "Bench plan file")->required()->check(CLI::ExistingFile);
    bench->add_option("--csv", bench_csv_name, "Output CSV")->capture_default_str();

    auto* transform = app.add_subcommand("transform", "Direct or indirect B-spline transform of a TBSF file");
    transform->add_option("in", input, "Input TBSF")->required()->check(CLI::ExistingFile);
    transform->add_option("out", output, "Output TBSF")->required();
    transform->add_option("--degree", degree, "Spline degree (indirect: used when the file has none)")
        ->check(CLI::Range(0, 5));
    transform->add_option("--direction", direction)->check(CLI::IsMember({"direct", "indirect"}));
    transform->add_option("--extension", extension)->check(CLI::IsMember({"mirror", "zero", "replicate"}));

    auto* kernels = app.add_subcommand("kernels", "Print a univariate kernel table as CSV");
    kernels->add_option("--nb", nb, "Basis degree")->check(CLI::Range(0, 5));
    auto* np_opt = kernels->add_option("--np", np, "Parameter degree (default: nb)")->check(CLI::Range(0, 5));
    kernels->add_option("--da", da, "Derivative order of the shifted basis function")->check(CLI::Range(0, 1));
    kernels->add_option("--db", db, "Derivative order of the test function")->check(CLI::Range(0, 1));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (threads > 0) {
            g.threads = threads;
            set_default_threads(threads);
        }
        if (!precision.empty()) g.precision = precision;
        if (*seed_opt) g.seed = seed;

        if (*solve) return run_solve(g, input);
        if (*conv) return run_convergence_cmd(g, input, csv_name);
        if (*bench) return run_bench_cmd(g, input, bench_csv_name);
        if (*transform) return run_transform(input, output, degree, direction, extension);
        if (*kernels) return run_kernels(nb, *np_opt ? std::optional<int>(np) : std::nullopt, da, db);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (e.kind() == ErrorKind::Usage) return kUsage;
        return e.is_numerical() ? kNumerical : kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}
