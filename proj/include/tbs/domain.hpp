#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tbs/common.hpp"

namespace tbs {

/// Uniform grid of nodes; node i on axis a sits at origin[a] + i * step[a].
struct Grid {
    int dim = 1;
    std::array<int, kMaxDim> nodes{2, 1, 1};
    std::array<double, kMaxDim> step{1.0, 1.0, 1.0};
    std::array<double, kMaxDim> origin{0.0, 0.0, 0.0};

    Grid() = default;
    Grid(int d, std::array<int, kMaxDim> n, std::array<double, kMaxDim> h,
         std::array<double, kMaxDim> o = {0.0, 0.0, 0.0});

    void validate() const;
    [[nodiscard]] Extents node_extents() const { return Extents(dim, nodes); }
    /// Cells per axis; unused axes carry one virtual cell.
    [[nodiscard]] Extents cell_extents() const;
    [[nodiscard]] double volume() const;
    [[nodiscard]] double coordinate(int axis, double index) const { return origin[axis] + index * step[axis]; }
};

/// Axis-aligned box or voxel mask over the grid's cells (cell-centered occupancy).
class Domain {
public:
    static Domain box(const Grid& grid);
    static Domain mask(const Grid& grid, std::vector<std::uint8_t> occupancy);

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] bool is_box() const noexcept { return is_box_; }
    [[nodiscard]] const std::vector<std::uint8_t>& occupancy() const noexcept { return occupied_; }
    [[nodiscard]] Index occupied_count() const noexcept { return occupied_count_; }

    /// False outside the cell grid.
    [[nodiscard]] bool occupied(long i, long j, long k) const noexcept {
        const Extents& e = cells_;
        if (i < 0 || j < 0 || k < 0 || i >= e.n[0] || j >= e.n[1] || k >= e.n[2]) return false;
        return occupied_[e.index(static_cast<int>(i), static_cast<int>(j), static_cast<int>(k))] != 0;
    }
    [[nodiscard]] const Extents& cells() const noexcept { return cells_; }

    /// Coarsened copy: a coarse cell is occupied when any covered fine cell is.
    [[nodiscard]] Domain coarsen(int factor) const;

private:
    Domain(Grid grid, std::vector<std::uint8_t> occupancy, bool is_box);

    Grid grid_;
    Extents cells_;
    std::vector<std::uint8_t> occupied_;
    Index occupied_count_ = 0;
    bool is_box_ = true;
};

enum class CellClass : std::uint8_t { Interior, Boundary, Exterior };

/// Interior cells are occupied cells whose (nb + np + 1)-wide kernel neighbourhood
/// (Chebyshev radius max(1, (nb+np+1)/2)) is occupied and inside the grid.
std::vector<CellClass> classify_cells(const Domain& domain, int nb = 1, int np = 1);

/// Role of each basis function (coefficient) in the operator.
enum class NodeClass : std::uint8_t {
    Inactive,   // support misses the domain (or dropped as negligible)
    Interior,   // full translation-invariant separable kernel
    Truncated,  // separable kernel truncated by the grid box only
    Boundary,   // non-separable kernel (support cut by the mask)
};

struct NodeClassification {
    Extents extents;  // padded coefficient grid
    int pad = 0;
    std::vector<NodeClass> classes;
    Index interior = 0, truncated = 0, boundary = 0, inactive = 0, dropped = 0;

    [[nodiscard]] Index active() const noexcept { return interior + truncated + boundary; }
    [[nodiscard]] bool is_active(Index i) const noexcept { return classes[i] != NodeClass::Inactive; }
};

/// Padded coefficient extents for degree n: nodes + 2 * floor(n/2) on each used axis.
Extents coefficient_extents(const Grid& grid, int degree);
int coefficient_pad(int degree);

/// Unknowns whose mass row (integral of beta_l over the domain, in grid units)
/// falls below `drop_tolerance` are made inactive and counted in `dropped`.
NodeClassification classify_nodes(const Domain& domain, int nb, double drop_tolerance = 1e-14);

/// Expansion coefficients of a field on the padded coefficient grid of its degree.
struct SplineField {
    int degree = 1;
    int pad = 0;
    Grid grid;
    CoeffTensor coeffs;

    /// Coefficient with index l (per axis, relative to node 0); zero outside storage.
    [[nodiscard]] double at(long i, long j, long k) const noexcept;
    [[nodiscard]] double evaluate(const std::array<double, kMaxDim>& x) const;
    [[nodiscard]] std::array<double, kMaxDim> gradient(const std::array<double, kMaxDim>& x) const;
};

/// Constant field on the padded grid of the given degree.
SplineField constant_field(const Grid& grid, int degree, double value);

/// Pad node-aligned coefficients to the padded grid by whole-sample mirroring.
SplineField pad_mirror(const CoeffTensor& node_coeffs, const Grid& grid, int degree);

/// Samples of the spline at every grid node (separable convolution with sampled B-splines).
CoeffTensor sample_at_nodes(const SplineField& field);

}  // namespace tbs
