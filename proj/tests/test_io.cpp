#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "tbs/io.hpp"

using namespace tbs;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const fs::path d = fs::temp_directory_path() / "tbs_io_tests";
    fs::create_directories(d);
    return d;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("TBSF round trip is bit exact") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    CoeffTensor t(Extents(3, {4, 5, 6}));
    for (Index i = 0; i < t.size(); ++i) t.data[i] = u(rng);
    t.data[0] = -0.0;
    t.data[1] = 5e-324;
    const std::string path = (scratch_dir() / "rt.tbsf").string();
    write_tbsf(path, t, DType::F64, 3);
    const RawTensor back = read_tbsf(path);
    CHECK(back.degree == 3);
    CHECK(back.dtype == DType::F64);
    REQUIRE(back.tensor.extents == t.extents);
    CHECK(std::memcmp(back.tensor.data.data(), t.data.data(), sizeof(double) * t.size()) == 0);

    write_tbsf(path, t, DType::F32);
    const RawTensor f = read_tbsf(path);
    CHECK(f.degree == -1);
    for (Index i = 0; i < t.size(); ++i) CHECK(f.tensor.data[i] == static_cast<double>(static_cast<float>(t.data[i])));
    CHECK(fs::file_size(path) == 4 + 4 + 4 + 12 + 4 + 4 + 4 * 120);
}

TEST_CASE("TBSF format errors") {
    const fs::path dir = scratch_dir();
    CoeffTensor t(Extents(2, {3, 3, 1}), 1.0);
    const std::string good = (dir / "good.tbsf").string();
    write_tbsf(good, t);
    std::string bytes;
    {
        std::ifstream in(good, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    write_file(dir / "trunc.tbsf", bytes.substr(0, bytes.size() - 5));
    try {
        read_tbsf((dir / "trunc.tbsf").string());
        FAIL("expected a format error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Format);
        const std::string msg = e.what();
        CHECK(msg.find("67 bytes") != std::string::npos);
        CHECK(msg.find("expected 72") != std::string::npos);
        CHECK(msg.find("byte 28") != std::string::npos);
    }
    std::string bad = bytes;
    bad[0] = 'X';
    write_file(dir / "magic.tbsf", bad);
    CHECK_THROWS_AS(read_tbsf((dir / "magic.tbsf").string()), Error);
    bad = bytes;
    bad[4] = 9;
    write_file(dir / "version.tbsf", bad);
    CHECK_THROWS_WITH_AS(read_tbsf((dir / "version.tbsf").string()), doctest::Contains("version 9"), Error);
    write_file(dir / "short.tbsf", bytes.substr(0, 10));
    CHECK_THROWS_WITH_AS(read_tbsf((dir / "short.tbsf").string()), doctest::Contains("truncated header"), Error);
}

TEST_CASE("mask files") {
    MaskVolume m;
    m.extents = Extents(3, {8, 4, 2});
    m.threshold = 128;
    m.values.resize(64);
    // Gray ramp 0, 4, 8, ..., 252: values >= 128 are indices 32..63.
    for (int i = 0; i < 64; ++i) m.values[i] = static_cast<std::uint8_t>(4 * i);
    const std::string path = (scratch_dir() / "ramp.mask").string();
    write_mask(path, m);
    const MaskVolume back = read_mask(path);
    CHECK(back.extents == m.extents);
    CHECK(back.threshold == 128);
    CHECK(back.values == m.values);
    const auto occ = back.occupancy();
    CHECK(std::count(occ.begin(), occ.end(), 1) == 32);
    const auto occ200 = back.occupancy(200);
    CHECK(std::count(occ200.begin(), occ200.end(), 1) == 14);  // 200, 204, ..., 252
    const Grid g = mask_grid(back, {0.5, 0.5, 0.5});
    CHECK(g.nodes == std::array<int, 3>{9, 5, 3});

    std::string text = "TBSMASK\nextents 2 2\nthreshold 1\n\n";
    write_file(scratch_dir() / "short.mask", text + "abc");
    CHECK_THROWS_WITH_AS(read_mask((scratch_dir() / "short.mask").string()), doctest::Contains("expected 4"), Error);
}

TEST_CASE("VTK export") {
    const Grid g(3, {2, 2, 2}, {0.5, 0.25, 2.0}, {1, 2, 3});
    CoeffTensor c(g.node_extents(), 7.0);
    const std::string golden =
        "# vtk DataFile Version 3.0\n"
        "tbs field export\n"
        "ASCII\n"
        "DATASET STRUCTURED_POINTS\n"
        "DIMENSIONS 2 2 2\n"
        "ORIGIN 1 2 3\n"
        "SPACING 0.5 0.25 2\n"
        "POINT_DATA 8\n"
        "SCALARS phi double 1\n"
        "LOOKUP_TABLE default\n"
        "7 7\n7 7\n7 7\n7 7\n";
    CHECK(vtk_text(g, {{"phi", &c}}) == golden);

    // x varies fastest.
    const Grid g2(2, {3, 2, 1}, {1, 1, 1});
    CoeffTensor r(g2.node_extents());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) r(i, j, 0) = 10 * i + j;
    CHECK(vtk_text(g2, {{"r", &r}}).find("0 10 20\n1 11 21\n") != std::string::npos);
    CHECK_THROWS_AS(vtk_text(Grid(1, {4, 1, 1}, {1, 1, 1}), {}), Error);
}

TEST_CASE("problem files") {
    const fs::path dir = scratch_dir();
    write_file(dir / "p.prob",
               "[grid]\nnodes = 11 9\nstep = 0.1\ndegree = 2\n"
               "[fields]\ndiffusion = 2.5\nsource = 1\n"
               "[bc]\nall = neumann\nx- = penalty g=20 eps=1e-5\ny+ = robin gamma=0.5 g=1\n"
               "[solver]\ntol = 1e-10\nstrategy = sparse\nprecision = single\ncoarse = 2\n"
               "[output]\nvtk = out.vtk\n");
    const ProblemFile pf = read_problem((dir / "p.prob").string());
    CHECK(pf.spec.domain.grid().nodes == std::array<int, 3>{11, 9, 1});
    CHECK(pf.spec.nb == 2);
    CHECK(pf.spec.diffusion.value == 2.5);
    CHECK(pf.spec.faces[0][0].kind == BCKind::DirichletPenalty);
    CHECK(pf.spec.faces[0][0].g == 20.0);
    CHECK(pf.spec.faces[0][0].epsilon == 1e-5);
    CHECK(pf.spec.faces[1][1].kind == BCKind::Robin);
    CHECK(pf.spec.faces[1][1].gamma == 0.5);
    CHECK(pf.spec.faces[1][0].kind == BCKind::Neumann);
    CHECK(pf.spec.strategy == Strategy::Sparse);
    CHECK(pf.spec.precision == Precision::Single);
    CHECK(pf.solver.coarse_factor == 2);
    CHECK(pf.solver.tol == 1e-10);
    CHECK(pf.output.vtk == "out.vtk");

    write_file(dir / "typo.prob", "[grid]\nnodes = 5 5\ndegre = 2\n");
    CHECK_THROWS_WITH_AS(read_problem((dir / "typo.prob").string()), doctest::Contains("degre"), Error);
    write_file(dir / "cauchy.prob", "[grid]\nnodes = 5 5\n[bc]\nall = cauchy\n");
    CHECK_THROWS_AS(read_problem((dir / "cauchy.prob").string()), Error);

    // Mask problem with a source region.
    MaskVolume m;
    m.extents = Extents(2, {4, 4, 1});
    m.threshold = 100;
    m.values = {0, 150, 150, 0, 150, 250, 150, 150, 150, 150, 150, 150, 0, 150, 150, 0};
    write_mask((dir / "m.mask").string(), m);
    write_file(dir / "m.prob",
               "[grid]\nmask = m.mask\nstep = 0.5\ndegree = 1\n[fields]\nsource_mask_level = 200\nsource_value = 3\n"
               "[bc]\nmask = penalty g=1\n");
    const ProblemFile mp = read_problem((dir / "m.prob").string());
    CHECK_FALSE(mp.spec.domain.is_box());
    CHECK(mp.spec.domain.occupied_count() == 12);
    REQUIRE(mp.spec.source.kind == FieldInput::Kind::Samples);
    // Voxel (1, 1) is the only source voxel: its four corner nodes carry the value.
    CHECK(mp.spec.source.samples.data.sum() == doctest::Approx(12.0));
    CHECK(mp.spec.source.samples(2, 2, 0) == 3.0);
    write_file(dir / "mrobin.prob", "[grid]\nmask = m.mask\n[bc]\nmask = robin gamma=1\n");
    CHECK_THROWS_AS(read_problem((dir / "mrobin.prob").string()), Error);
}

TEST_CASE("study and bench plan files") {
    const fs::path dir = scratch_dir();
    write_file(dir / "s.study", "[study]\nfamily = cosine2d\ndegrees = 1 2\nlevels = 1 2 3\ngnuplot = true\n");
    const StudyFile s = read_study((dir / "s.study").string());
    CHECK(s.family == StudyFamily::Cosine2D);
    CHECK(s.degrees == std::vector<int>{1, 2});
    CHECK(s.levels == std::vector<int>{1, 2, 3});
    CHECK(s.gnuplot);

    write_file(dir / "b.plan", "[bench]\ngrids = 16x16x16 8x8\ndegrees = 1 3\nstrategies = onthefly block\n"
                               "threads = 1 2\nprecisions = double single\nrepetitions = 3\n");
    const BenchPlan p = read_bench_plan((dir / "b.plan").string());
    CHECK(p.grids.size() == 2);
    CHECK(p.grids[1] == std::vector<int>{8, 8});
    CHECK(p.strategies.size() == 2);
    write_file(dir / "bad.plan", "[bench]\nrepetitions = 2\n");
    CHECK_THROWS_AS(read_bench_plan((dir / "bad.plan").string()), Error);
}

TEST_CASE("bench harness") {
    BenchPlan p;
    p.grids = {{12, 12, 12}};
    p.degrees = {1, 2};
    p.strategies = {Strategy::OnTheFly, Strategy::BlockTensor, Strategy::Sparse};
    p.threads = {1, 2, 3};
    p.precisions = {Precision::Double};
    const auto results = run_bench(p);
    REQUIRE(results.size() == 18);
    for (const auto& r : results) {
        CHECK(r.median_seconds > 0.0);
        CHECK(r.gflops > 0.0);
        if (r.threads == 1) CHECK(r.speedup == 1.0);
    }
    // Cross-strategy checksums agree per degree.
    for (std::size_t i = 0; i < results.size(); ++i)
        for (std::size_t j = 0; j < results.size(); ++j)
            if (results[i].degree == results[j].degree)
                CHECK(results[i].checksum == doctest::Approx(results[j].checksum).epsilon(1e-12));
    const std::string csv = bench_csv(results);
    CHECK(csv.rfind("# tbs-bench-1\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 20);

    // On-the-fly bytes read: coefficients plus two fields; degree enters only through padding.
    CHECK(results[0].bytes_read == 3.0 * 12 * 12 * 12 * 8);
    CHECK(results[9].bytes_read == 3.0 * 14 * 14 * 14 * 8);
}
