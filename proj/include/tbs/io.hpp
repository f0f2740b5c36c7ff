#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tbs/bench.hpp"
#include "tbs/domain.hpp"
#include "tbs/pde.hpp"
#include "tbs/verify.hpp"

namespace tbs {

// --- Raw tensor files -------------------------------------------------------------------------
// Layout (little-endian): "TBSF", u32 version, u32 dim, u32 extents[dim], u32 dtype (1 = f32,
// 2 = f64), i32 degree (-1 for node samples), then the row-major payload.

enum class DType : std::uint32_t { F32 = 1, F64 = 2 };

inline constexpr std::uint32_t kTbsfVersion = 1;

struct RawTensor {
    CoeffTensor tensor;
    DType dtype = DType::F64;
    int degree = -1;
};

void write_tbsf(const std::string& path, const CoeffTensor& t, DType dtype = DType::F64, int degree = -1);
RawTensor read_tbsf(const std::string& path);

// --- Mask files --------------------------------------------------------------------------------
// Text header "TBSMASK", "extents <n...>", "threshold <0..255>", a blank line, then one byte per
// cell in row-major order. Cells with value >= threshold belong to the domain.

struct MaskVolume {
    Extents extents;  // cells per axis
    int threshold = 128;
    std::vector<std::uint8_t> values;

    [[nodiscard]] std::vector<std::uint8_t> occupancy(int level) const;
    [[nodiscard]] std::vector<std::uint8_t> occupancy() const { return occupancy(threshold); }
};

void write_mask(const std::string& path, const MaskVolume& mask);
MaskVolume read_mask(const std::string& path);

/// Grid whose cells are the mask voxels, with the given voxel size and origin.
Grid mask_grid(const MaskVolume& mask, const std::array<double, kMaxDim>& voxel,
               const std::array<double, kMaxDim>& origin = {0.0, 0.0, 0.0});

// --- Output ------------------------------------------------------------------------------------

/// Legacy ASCII STRUCTURED_POINTS file with one scalar point field per entry (2-D or 3-D).
void export_vtk(const std::string& path, const Grid& grid,
                const std::vector<std::pair<std::string, const CoeffTensor*>>& fields);
std::string vtk_text(const Grid& grid, const std::vector<std::pair<std::string, const CoeffTensor*>>& fields);

/// Writes to a temporary sibling and renames it into place.
void write_text_atomic(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// --- Configuration files -----------------------------------------------------------------------

struct OutputOptions {
    std::string solution = "solution.tbsf";
    std::string report = "report.csv";
    std::string vtk;  // empty: no VTK output
};

struct ProblemFile {
    ProblemSpec spec;
    SolveConfig solver;
    OutputOptions output;
    int threads = 0;
};

/// Parses a problem file ([grid], [fields], [bc], [solver], [output]). Relative paths are
/// resolved against the file's directory.
ProblemFile read_problem(const std::string& path);

struct StudyFile {
    StudyFamily family = StudyFamily::Diffusion1D;
    std::vector<int> degrees{1, 2, 3};
    std::vector<int> levels{0, 1, 2, 3};
    StudyOptions options;
    bool gnuplot = false;
};

StudyFile read_study(const std::string& path);
BenchPlan read_bench_plan(const std::string& path);

/// Key reference printed by the CLI's --help.
std::string config_reference();

/// "penalty g=20 eps=1e-4", "robin gamma=1 g=0", "neumann".
BoundaryCondition parse_boundary_condition(const std::string& text);

}  // namespace tbs
