#include "tbs/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace tbs {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

template <typename T>
void put(std::string& out, T v) {
    v = to_little(v);
    const char* p = reinterpret_cast<const char*>(&v);
    out.append(p, sizeof(T));
}

class Reader {
public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    template <typename T>
    T get(const char* what) {
        if (pos_ + sizeof(T) > data_.size()) {
            throw Error(ErrorKind::Format, path_ + ": truncated header reading " + what + " at byte " +
                                               std::to_string(pos_));
        }
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return to_little(v);
    }
    [[nodiscard]] std::size_t pos() const { return pos_; }
    [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }
    [[nodiscard]] const char* here() const { return data_.data() + pos_; }
    void skip(std::size_t n) { pos_ += n; }

private:
    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string read_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Format, "cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_binary_atomic(const std::string& path, const std::string& bytes) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Format, "cannot write '" + tmp + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorKind::Format, "write failed for '" + tmp + "'");
    }
    fs::rename(tmp, target);
}

}  // namespace

void write_tbsf(const std::string& path, const CoeffTensor& t, DType dtype, int degree) {
    std::string out = "TBSF";
    put<std::uint32_t>(out, kTbsfVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.extents.dim));
    for (int a = 0; a < t.extents.dim; ++a) put<std::uint32_t>(out, static_cast<std::uint32_t>(t.extents.n[a]));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dtype));
    put<std::int32_t>(out, degree);
    out.reserve(out.size() + static_cast<std::size_t>(t.size()) * 8);
    for (Index i = 0; i < t.size(); ++i) {
        if (dtype == DType::F32) {
            put<float>(out, static_cast<float>(t.data[i]));
        } else {
            put<double>(out, t.data[i]);
        }
    }
    write_binary_atomic(path, out);
}

RawTensor read_tbsf(const std::string& path) {
    Reader r(read_binary(path), path);
    if (r.remaining() < 4 || std::memcmp(r.here(), "TBSF", 4) != 0) {
        throw Error(ErrorKind::Format, path + ": bad magic at byte 0 (expected TBSF)");
    }
    r.skip(4);
    const std::size_t version_at = r.pos();
    const auto version = r.get<std::uint32_t>("version");
    if (version != kTbsfVersion) {
        throw Error(ErrorKind::Format, path + ": unsupported version " + std::to_string(version) + " at byte " +
                                           std::to_string(version_at));
    }
    const std::size_t dim_at = r.pos();
    const auto dim = r.get<std::uint32_t>("dim");
    if (dim < 1 || dim > kMaxDim) {
        throw Error(ErrorKind::Format, path + ": dimension " + std::to_string(dim) + " at byte " +
                                           std::to_string(dim_at) + " outside 1..3");
    }
    std::array<int, kMaxDim> n{1, 1, 1};
    for (std::uint32_t a = 0; a < dim; ++a) {
        const std::size_t at = r.pos();
        const auto v = r.get<std::uint32_t>("extent");
        if (v == 0 || v > (1u << 24)) {
            throw Error(ErrorKind::Format, path + ": extent " + std::to_string(v) + " at byte " + std::to_string(at));
        }
        n[a] = static_cast<int>(v);
    }
    const std::size_t dtype_at = r.pos();
    const auto dt = r.get<std::uint32_t>("dtype");
    if (dt != 1 && dt != 2) {
        throw Error(ErrorKind::Format, path + ": unknown dtype tag " + std::to_string(dt) + " at byte " +
                                           std::to_string(dtype_at));
    }
    RawTensor out;
    out.dtype = static_cast<DType>(dt);
    out.degree = r.get<std::int32_t>("degree");
    out.tensor = CoeffTensor(Extents(static_cast<int>(dim), n));
    const std::size_t width = out.dtype == DType::F32 ? 4 : 8;
    const std::size_t expected = static_cast<std::size_t>(out.tensor.size()) * width;
    if (r.remaining() != expected) {
        throw Error(ErrorKind::Format, path + ": payload at byte " + std::to_string(r.pos()) + " has " +
                                           std::to_string(r.remaining()) + " bytes, expected " +
                                           std::to_string(expected));
    }
    for (Index i = 0; i < out.tensor.size(); ++i)
        out.tensor.data[i] = out.dtype == DType::F32 ? static_cast<double>(r.get<float>("payload"))
                                                     : r.get<double>("payload");
    return out;
}

std::vector<std::uint8_t> MaskVolume::occupancy(int level) const {
    std::vector<std::uint8_t> occ(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) occ[i] = values[i] >= level ? 1 : 0;
    return occ;
}

void write_mask(const std::string& path, const MaskVolume& mask) {
    if (static_cast<Index>(mask.values.size()) != mask.extents.size()) {
        throw Error(ErrorKind::ExtentMismatch, "mask volume length does not match its extents");
    }
    std::ostringstream os;
    os << "TBSMASK\nextents";
    for (int a = 0; a < mask.extents.dim; ++a) os << ' ' << mask.extents.n[a];
    os << "\nthreshold " << mask.threshold << "\n\n";
    std::string out = os.str();
    out.append(reinterpret_cast<const char*>(mask.values.data()), mask.values.size());
    write_binary_atomic(path, out);
}

MaskVolume read_mask(const std::string& path) {
    const std::string data = read_binary(path);
    std::size_t pos = 0;
    auto line = [&]() {
        const std::size_t end = data.find('\n', pos);
        if (end == std::string::npos) {
            throw Error(ErrorKind::Format, path + ": unterminated header line at byte " + std::to_string(pos));
        }
        std::string l = data.substr(pos, end - pos);
        pos = end + 1;
        return l;
    };
    if (line() != "TBSMASK") throw Error(ErrorKind::Format, path + ": bad magic at byte 0 (expected TBSMASK)");
    MaskVolume m;
    bool have_extents = false;
    for (;;) {
        const std::size_t at = pos;
        const std::string l = line();
        if (l.empty()) break;
        std::istringstream is(l);
        std::string key;
        is >> key;
        if (key == "extents") {
            std::array<int, kMaxDim> n{1, 1, 1};
            int d = 0, v = 0;
            while (is >> v) {
                if (d == kMaxDim || v < 1) {
                    throw Error(ErrorKind::Format, path + ": bad extents at byte " + std::to_string(at));
                }
                n[d++] = v;
            }
            if (d == 0) throw Error(ErrorKind::Format, path + ": empty extents at byte " + std::to_string(at));
            m.extents = Extents(d, n);
            have_extents = true;
        } else if (key == "threshold") {
            if (!(is >> m.threshold) || m.threshold < 0 || m.threshold > 255) {
                throw Error(ErrorKind::Format, path + ": bad threshold at byte " + std::to_string(at));
            }
        } else {
            throw Error(ErrorKind::Format, path + ": unknown header key '" + key + "' at byte " + std::to_string(at));
        }
    }
    if (!have_extents) throw Error(ErrorKind::Format, path + ": header has no extents");
    const std::size_t expected = static_cast<std::size_t>(m.extents.size());
    if (data.size() - pos != expected) {
        throw Error(ErrorKind::Format, path + ": volume at byte " + std::to_string(pos) + " has " +
                                           std::to_string(data.size() - pos) + " bytes, expected " +
                                           std::to_string(expected));
    }
    m.values.assign(data.begin() + static_cast<std::ptrdiff_t>(pos), data.end());
    return m;
}

Grid mask_grid(const MaskVolume& mask, const std::array<double, kMaxDim>& voxel,
               const std::array<double, kMaxDim>& origin) {
    std::array<int, kMaxDim> nodes{1, 1, 1};
    for (int a = 0; a < mask.extents.dim; ++a) nodes[a] = mask.extents.n[a] + 1;
    return Grid(mask.extents.dim, nodes, voxel, origin);
}

std::string vtk_text(const Grid& grid, const std::vector<std::pair<std::string, const CoeffTensor*>>& fields) {
    if (grid.dim < 2) throw Error(ErrorKind::Misuse, "VTK export needs a 2-D or 3-D grid");
    std::ostringstream os;
    os << "# vtk DataFile Version 3.0\ntbs field export\nASCII\nDATASET STRUCTURED_POINTS\n";
    os << "DIMENSIONS " << grid.nodes[0] << ' ' << grid.nodes[1] << ' ' << grid.nodes[2] << '\n';
    os << std::setprecision(17);
    os << "ORIGIN " << grid.origin[0] << ' ' << grid.origin[1] << ' ' << grid.origin[2] << '\n';
    os << "SPACING " << grid.step[0] << ' ' << grid.step[1] << ' ' << (grid.dim > 2 ? grid.step[2] : 1.0) << '\n';
    os << "POINT_DATA " << grid.node_extents().size() << '\n';
    for (const auto& [name, t] : fields) {
        if (!(t->extents == grid.node_extents())) {
            throw Error(ErrorKind::ExtentMismatch, "VTK field '" + name + "' does not match the grid nodes");
        }
        os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        // VTK orders points with x fastest.
        for (int k = 0; k < grid.nodes[2]; ++k)
            for (int j = 0; j < grid.nodes[1]; ++j) {
                for (int i = 0; i < grid.nodes[0]; ++i) os << (i ? " " : "") << (*t)(i, j, k);
                os << '\n';
            }
    }
    return os.str();
}

void export_vtk(const std::string& path, const Grid& grid,
                const std::vector<std::pair<std::string, const CoeffTensor*>>& fields) {
    write_text_atomic(path, vtk_text(grid, fields));
}

void write_text_atomic(const std::string& path, const std::string& text) { write_binary_atomic(path, text); }

std::string read_text(const std::string& path) { return read_binary(path); }

// --- Configuration ---------------------------------------------------------------------------

namespace {

std::vector<std::string> words(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> w;
    std::string x;
    while (is >> x) w.push_back(x);
    return w;
}

template <typename T>
std::vector<T> numbers(const std::string& s, const std::string& key) {
    std::vector<T> out;
    for (const auto& w : words(s)) {
        std::istringstream is(w);
        T v{};
        if (!(is >> v) || !is.eof()) throw Error(ErrorKind::Configuration, "bad number '" + w + "' in " + key);
        out.push_back(v);
    }
    return out;
}

double number(const std::string& s, const std::string& key) {
    const auto v = numbers<double>(s, key);
    if (v.size() != 1) throw Error(ErrorKind::Configuration, key + " needs one number");
    return v[0];
}

bool flag(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw Error(ErrorKind::Configuration, key + " must be true or false");
}

std::array<double, kMaxDim> per_axis(const std::string& s, int dim, const std::string& key, double fill) {
    const auto v = numbers<double>(s, key);
    std::array<double, kMaxDim> out{fill, fill, fill};
    if (v.size() == 1) {
        for (int a = 0; a < dim; ++a) out[a] = v[0];
    } else if (static_cast<int>(v.size()) == dim) {
        for (int a = 0; a < dim; ++a) out[a] = v[a];
    } else {
        throw Error(ErrorKind::Configuration, key + " needs 1 or " + std::to_string(dim) + " values");
    }
    return out;
}

pt::ptree load_ini(const std::string& path) {
    pt::ptree tree;
    try {
        pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::Configuration, e.what());
    }
    return tree;
}

/// Rejects keys outside `allowed` so typos do not pass silently.
void check_keys(const pt::ptree& tree, const std::string& section, const std::vector<std::string>& allowed) {
    const auto sec = tree.get_child_optional(section);
    if (!sec) return;
    for (const auto& [key, value] : *sec) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw Error(ErrorKind::Configuration, "unknown key '" + key + "' in [" + section + "]");
        }
    }
}

std::string resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? p : (base / path).string();
}

bool is_number(const std::string& s) {
    std::istringstream is(s);
    double v;
    return (is >> v) && is.eof();
}

FieldInput field_input(const std::string& value, const fs::path& base, const Grid& grid, const std::string& key) {
    if (is_number(value)) return FieldInput::constant(number(value, key));
    RawTensor raw = read_tbsf(resolve(base, value));
    if (raw.degree >= 0) {
        throw Error(ErrorKind::Configuration, key + ": '" + value + "' holds coefficients; node samples are expected");
    }
    if (!(raw.tensor.extents == grid.node_extents())) {
        throw Error(ErrorKind::ExtentMismatch, key + ": " + to_string(raw.tensor.extents) + " does not match grid nodes " +
                                                   to_string(grid.node_extents()));
    }
    return FieldInput::sampled(std::move(raw.tensor));
}

}  // namespace

BoundaryCondition parse_boundary_condition(const std::string& text) {
    const auto w = words(text);
    if (w.empty()) throw Error(ErrorKind::Configuration, "empty boundary condition");
    BoundaryCondition bc;
    bc.kind = parse_bc_kind(w[0]);
    for (std::size_t i = 1; i < w.size(); ++i) {
        const auto eq = w[i].find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::Configuration, "expected key=value in '" + text + "'");
        const std::string key = w[i].substr(0, eq);
        const double v = number(w[i].substr(eq + 1), key);
        if (key == "g") {
            bc.g = v;
        } else if (key == "gamma") {
            bc.gamma = v;
        } else if (key == "eps" || key == "epsilon") {
            bc.epsilon = v;
        } else {
            throw Error(ErrorKind::Configuration, "unknown boundary parameter '" + key + "'");
        }
    }
    return bc;
}

ProblemFile read_problem(const std::string& path) {
    const pt::ptree t = load_ini(path);
    const fs::path base = fs::path(path).parent_path();
    check_keys(t, "grid", {"dim", "nodes", "step", "origin", "mask", "threshold", "degree", "param_degree",
                           "source_degree"});
    check_keys(t, "fields", {"diffusion", "absorption", "source", "source_mask_level", "source_value", "source_mode"});
    check_keys(t, "bc", {"all", "mask", "x-", "x+", "y-", "y+", "z-", "z+"});
    check_keys(t, "solver", {"method", "tol", "max_iter", "precond", "coarse", "strategy", "precision", "threads",
                             "history"});
    check_keys(t, "output", {"solution", "report", "vtk"});
    for (const auto& [section, sub] : t) {
        if (section != "grid" && section != "fields" && section != "bc" && section != "solver" && section != "output") {
            throw Error(ErrorKind::Configuration, "unknown section [" + section + "]");
        }
    }

    // [grid]
    std::optional<MaskVolume> mask;
    Grid grid;
    if (const auto m = t.get_optional<std::string>("grid.mask")) {
        mask = read_mask(resolve(base, *m));
        if (const auto th = t.get_optional<std::string>("grid.threshold")) mask->threshold = static_cast<int>(number(*th, "threshold"));
        const int dim = mask->extents.dim;
        const auto step = per_axis(t.get<std::string>("grid.step", "1"), dim, "step", 1.0);
        const auto origin = per_axis(t.get<std::string>("grid.origin", "0"), dim, "origin", 0.0);
        grid = mask_grid(*mask, step, origin);
    } else {
        const auto nodes = numbers<int>(t.get<std::string>("grid.nodes", ""), "nodes");
        if (nodes.empty() || nodes.size() > kMaxDim) throw Error(ErrorKind::Configuration, "[grid] nodes needs 1 to 3 values");
        const int dim = static_cast<int>(t.get<double>("grid.dim", static_cast<double>(nodes.size())));
        if (dim != static_cast<int>(nodes.size())) throw Error(ErrorKind::Configuration, "[grid] dim does not match nodes");
        std::array<int, kMaxDim> n{1, 1, 1};
        for (int a = 0; a < dim; ++a) n[a] = nodes[a];
        const auto step = per_axis(t.get<std::string>("grid.step", "1"), dim, "step", 1.0);
        const auto origin = per_axis(t.get<std::string>("grid.origin", "0"), dim, "origin", 0.0);
        grid = Grid(dim, n, step, origin);
    }
    grid.validate();
    const Domain domain = mask ? Domain::mask(grid, mask->occupancy()) : Domain::box(grid);
    ProblemFile pf{ProblemSpec(domain), SolveConfig{}, OutputOptions{}, 0};
    ProblemSpec& spec = pf.spec;
    spec.nb = static_cast<int>(number(t.get<std::string>("grid.degree", "3"), "degree"));
    spec.np = static_cast<int>(number(t.get<std::string>("grid.param_degree", "-1"), "param_degree"));
    spec.ns = static_cast<int>(number(t.get<std::string>("grid.source_degree", "-1"), "source_degree"));

    // [fields]
    spec.diffusion = field_input(t.get<std::string>("fields.diffusion", "1"), base, grid, "diffusion");
    spec.absorption = field_input(t.get<std::string>("fields.absorption", "0"), base, grid, "absorption");
    spec.source = field_input(t.get<std::string>("fields.source", "0"), base, grid, "source");
    if (const auto level = t.get_optional<std::string>("fields.source_mask_level")) {
        if (!mask) throw Error(ErrorKind::Configuration, "source_mask_level needs a [grid] mask");
        if (spec.source.kind != FieldInput::Kind::Constant) {
            throw Error(ErrorKind::Configuration, "source_mask_level combines only with a constant background source");
        }
        const int lv = static_cast<int>(number(*level, "source_mask_level"));
        const double value = number(t.get<std::string>("fields.source_value", "1"), "source_value");
        // A node carries the source value when any adjacent voxel reaches the level.
        const Extents ce = grid.cell_extents();
        CoeffTensor q(grid.node_extents(), spec.source.value);
        for (int i = 0; i < grid.nodes[0]; ++i)
            for (int j = 0; j < grid.nodes[1]; ++j)
                for (int k = 0; k < grid.nodes[2]; ++k) {
                    bool hit = false;
                    for (int di = -1; di <= 0 && !hit; ++di)
                        for (int dj = (grid.dim > 1 ? -1 : 0); dj <= 0 && !hit; ++dj)
                            for (int dk = (grid.dim > 2 ? -1 : 0); dk <= 0 && !hit; ++dk) {
                                const int ci = i + di, cj = j + dj, ck = k + dk;
                                if (ci < 0 || cj < 0 || ck < 0 || ci >= ce.n[0] || cj >= ce.n[1] || ck >= ce.n[2]) continue;
                                hit = mask->values[ce.index(ci, cj, ck)] >= lv;
                            }
                    if (hit) q(i, j, k) = value;
                }
        spec.source = FieldInput::sampled(std::move(q));
    }
    const std::string mode = t.get<std::string>("fields.source_mode", "interpolation");
    if (mode == "interpolation") {
        spec.source_mode = SourceMode::Interpolation;
    } else if (mode == "projection") {
        spec.source_mode = SourceMode::Projection;
    } else {
        throw Error(ErrorKind::Configuration, "source_mode must be interpolation or projection");
    }

    // [bc]
    spec.set_all_faces(parse_boundary_condition(t.get<std::string>("bc.all", "neumann")));
    if (const auto m = t.get_optional<std::string>("bc.mask")) spec.mask_bc = parse_boundary_condition(*m);
    const char* names[kMaxDim][2] = {{"x-", "x+"}, {"y-", "y+"}, {"z-", "z+"}};
    for (int a = 0; a < kMaxDim; ++a)
        for (int side = 0; side < 2; ++side) {
            const auto v = t.get_child_optional(pt::ptree::path_type(std::string("bc/") + names[a][side], '/'));
            if (!v) continue;
            if (a >= grid.dim) throw Error(ErrorKind::Configuration, std::string("face ") + names[a][side] + " beyond the grid dimension");
            if (mask) throw Error(ErrorKind::Configuration, "mask domains take a single [bc] mask condition");
            spec.faces[a][side] = parse_boundary_condition(v->data());
        }

    // [solver]
    SolveConfig& s = pf.solver;
    s.method = parse_solve_method(t.get<std::string>("solver.method", "pcg"));
    s.tol = number(t.get<std::string>("solver.tol", "1e-8"), "tol");
    s.max_iter = static_cast<int>(number(t.get<std::string>("solver.max_iter", "1000"), "max_iter"));
    s.precond = parse_preconditioner(t.get<std::string>("solver.precond", "jacobi"));
    s.coarse_factor = static_cast<int>(number(t.get<std::string>("solver.coarse", "0"), "coarse"));
    s.record_history = flag(t.get<std::string>("solver.history", "false"), "history");
    spec.strategy = parse_strategy(t.get<std::string>("solver.strategy", "onthefly"));
    spec.precision = parse_precision(t.get<std::string>("solver.precision", "double"));
    pf.threads = static_cast<int>(number(t.get<std::string>("solver.threads", "0"), "threads"));
    s.validate();

    // [output]
    pf.output.solution = t.get<std::string>("output.solution", pf.output.solution);
    pf.output.report = t.get<std::string>("output.report", pf.output.report);
    pf.output.vtk = t.get<std::string>("output.vtk", "");

    spec.validate();
    return pf;
}

StudyFile read_study(const std::string& path) {
    const pt::ptree t = load_ini(path);
    check_keys(t, "study", {"family", "degrees", "levels", "diffusion", "absorption", "gamma", "half_width", "length",
                            "reference_degree", "reference_refinement", "method", "tol", "max_iter", "gnuplot"});
    StudyFile sf;
    sf.family = parse_study_family(t.get<std::string>("study.family", "diffusion1d"));
    if (const auto d = t.get_optional<std::string>("study.degrees")) sf.degrees = numbers<int>(*d, "degrees");
    if (const auto l = t.get_optional<std::string>("study.levels")) sf.levels = numbers<int>(*l, "levels");
    StudyOptions& o = sf.options;
    o.diffusion = number(t.get<std::string>("study.diffusion", "1"), "diffusion");
    o.absorption = number(t.get<std::string>("study.absorption", "0.1"), "absorption");
    o.gamma = number(t.get<std::string>("study.gamma", "1"), "gamma");
    o.half_width = number(t.get<std::string>("study.half_width", "25"), "half_width");
    o.cosine_length = number(t.get<std::string>("study.length", "4"), "length");
    o.reference_degree = static_cast<int>(number(t.get<std::string>("study.reference_degree", "5"), "reference_degree"));
    o.reference_refinement =
        static_cast<int>(number(t.get<std::string>("study.reference_refinement", "16"), "reference_refinement"));
    o.solver.method = parse_solve_method(t.get<std::string>("study.method", "direct"));
    o.solver.tol = number(t.get<std::string>("study.tol", "1e-12"), "tol");
    o.solver.max_iter = static_cast<int>(number(t.get<std::string>("study.max_iter", "100000"), "max_iter"));
    sf.gnuplot = flag(t.get<std::string>("study.gnuplot", "false"), "gnuplot");
    return sf;
}

BenchPlan read_bench_plan(const std::string& path) {
    const pt::ptree t = load_ini(path);
    check_keys(t, "bench", {"grids", "degrees", "strategies", "threads", "precisions", "repetitions", "warmup", "seed",
                            "memory_budget_gb"});
    BenchPlan p;
    if (const auto g = t.get_optional<std::string>("bench.grids")) {
        p.grids.clear();
        for (const auto& w : words(*g)) {
            std::vector<int> n;
            std::string part;
            std::istringstream is(w);
            while (std::getline(is, part, 'x')) n.push_back(static_cast<int>(number(part, "grids")));
            p.grids.push_back(n);
        }
    }
    if (const auto d = t.get_optional<std::string>("bench.degrees")) p.degrees = numbers<int>(*d, "degrees");
    if (const auto s = t.get_optional<std::string>("bench.strategies")) {
        p.strategies.clear();
        for (const auto& w : words(*s)) p.strategies.push_back(parse_strategy(w));
    }
    if (const auto th = t.get_optional<std::string>("bench.threads")) p.threads = numbers<int>(*th, "threads");
    if (const auto pr = t.get_optional<std::string>("bench.precisions")) {
        p.precisions.clear();
        for (const auto& w : words(*pr)) p.precisions.push_back(parse_precision(w));
    }
    p.repetitions = static_cast<int>(number(t.get<std::string>("bench.repetitions", "3"), "repetitions"));
    p.warmup = static_cast<int>(number(t.get<std::string>("bench.warmup", "1"), "warmup"));
    p.seed = static_cast<std::uint64_t>(number(t.get<std::string>("bench.seed", "1"), "seed"));
    if (const auto m = t.get_optional<std::string>("bench.memory_budget_gb")) {
        p.memory_budget = number(*m, "memory_budget_gb") * double(1ull << 30);
    }
    p.validate();
    return p;
}

std::string config_reference() {
    return R"(Problem file (solve):
  [grid]   nodes = 33 33 [33]      node counts per axis (box domain)
           mask = file.mask        voxel mask instead of nodes; cells are voxels
           threshold = 128         override the mask file's gray threshold
           step = 0.1 [...]        node spacing (one value or one per axis)
           origin = 0 [...]        position of node 0
           degree = 3              basis degree nb (0..5)
           param_degree = -1       degree of D and mu_a (-1: nb)
           source_degree = -1      degree of q (-1: nb)
  [fields] diffusion = 1 | f.tbsf  constant or node samples (TBSF)
           absorption = 0 | f.tbsf
           source = 0 | f.tbsf
           source_mask_level = 200 nodes next to voxels >= level get source_value
           source_value = 1
           source_mode = interpolation | projection
  [bc]     all = neumann           default for every box face
           x- / x+ / y- / y+ / z- / z+ = robin gamma=1 g=0 | penalty g=20 eps=1e-5 | neumann
           mask = penalty g=20     condition on mask boundaries (penalty or neumann)
  [solver] method = pcg | direct, tol = 1e-8, max_iter = 1000, precond = jacobi | none,
           coarse = 0 (coarsening factor for initialization), strategy = onthefly | block | sparse,
           precision = double | single, threads = 0, history = false
  [output] solution = solution.tbsf, report = report.csv, vtk = (empty: none)

Study file (convergence):
  [study]  family = diffusion1d | cosine2d | poly, degrees = 1 2 3, levels = 0 1 2 3,
           diffusion, absorption, gamma, half_width, length, reference_degree = 5,
           reference_refinement = 16, method = direct | pcg, tol, max_iter, gnuplot = false

Bench plan (bench --plan):
  [bench]  grids = 64x64x64 128x128x128, degrees = 1 3, strategies = onthefly block sparse,
           threads = 1 2 4, precisions = double single, repetitions = 3, warmup = 1, seed = 1,
           memory_budget_gb = 16
)";
}

}  // namespace tbs
