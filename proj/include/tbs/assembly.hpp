#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "tbs/domain.hpp"
#include "tbs/kernels.hpp"

namespace tbs {

/// Surface weight and data of a boundary face: the bilinear form gains
/// sigma * int phi psi and the load gains flux * int psi (flux = sigma * g).
struct FaceCoefficients {
    double sigma = 0.0;
    double flux = 0.0;
};

/// Face coefficients for faces on the grid box (per axis and side) and for faces
/// between occupied and unoccupied cells inside the grid.
struct SurfaceModel {
    std::array<std::array<FaceCoefficients, 2>, kMaxDim> edge{};
    FaceCoefficients interior{};

    static SurfaceModel uniform(FaceCoefficients c) {
        SurfaceModel s;
        for (auto& axis : s.edge) axis = {c, c};
        s.interior = c;
        return s;
    }
};

/// Per-axis tables on a single unit cell in cell-local offsets (offset 0 = cell's left node).
/// Unused axes have width 1 with f = mass = integral = 1 and w = 0.
struct AxisCellTables {
    int wb = 1, wp = 1, ws = 1;
    int lo_b = 0, lo_p = 0, lo_s = 0;
    std::vector<double> f, w;           // [k][l][m]
    std::vector<double> mass;           // [k][l]
    std::vector<double> source;         // [j][l]
    std::vector<double> integral;       // [l]
    std::array<std::vector<double>, 2> face;  // [side][l], beta at the cell's left/right end

    [[nodiscard]] double f_at(int k, int l, int m) const { return f[(k * wb + l) * wp + m]; }
    [[nodiscard]] double w_at(int k, int l, int m) const { return w[(k * wb + l) * wp + m]; }
};

struct ElementContext {
    int dim = 1;
    int nb = 1, np = 1, ns = 1;
    std::array<double, kMaxDim> step{1.0, 1.0, 1.0};
    std::array<AxisCellTables, kMaxDim> axes;
    std::array<double, kMaxDim> stiffness_scale{0.0, 0.0, 0.0};
    double volume = 1.0;

    /// Number of basis functions overlapping one cell.
    [[nodiscard]] int local_count() const { return axes[0].wb * axes[1].wb * axes[2].wb; }
    /// Coefficient index (relative to node 0) of local function `local` on axis `axis` of cell j.
    [[nodiscard]] std::array<int, kMaxDim> local_offsets(int local) const;
};

ElementContext make_element_context(const Grid& grid, int nb, int np, int ns);

/// Volume part of the element matrix of cell `cell`: rows are trial functions k,
/// columns test functions l, both in local order (k0 * wb1 + k1) * wb2 + k2.
void element_matrix(const ElementContext& ctx, const SplineField& d, const SplineField& mu,
                    const std::array<int, kMaxDim>& cell, Eigen::MatrixXd& out);

/// Element load vector of the source field q (degree ns).
void element_vector(const ElementContext& ctx, const SplineField& q, const std::array<int, kMaxDim>& cell,
                    Eigen::VectorXd& out);

/// Surface term of the face of a cell on `axis`, `side` 0 (left) or 1 (right).
void add_face_matrix(const ElementContext& ctx, int axis, int side, double sigma, Eigen::MatrixXd& out);
void add_face_vector(const ElementContext& ctx, int axis, int side, double flux, Eigen::VectorXd& out);

struct BoundaryFace {
    int axis;
    int side;
    FaceCoefficients coeffs;
};

/// Faces of an occupied cell that separate it from an unoccupied or off-grid cell.
std::vector<BoundaryFace> boundary_faces(const Domain& domain, const SurfaceModel& surface,
                                         const std::array<int, kMaxDim>& cell);

/// Element matrix plus surface terms of a Boundary cell, integrated by tensor Gauss
/// quadrature over the (fully occupied) cell. Interior cells are a misuse.
Eigen::MatrixXd boundary_cell_quadrature(const Domain& domain, const std::vector<CellClass>& classes,
                                         const ElementContext& ctx, const SurfaceModel& surface,
                                         const SplineField& d, const SplineField& mu,
                                         const std::array<int, kMaxDim>& cell);

}  // namespace tbs
