#pragma once

#include <array>
#include <vector>

#include "tbs/bspline.hpp"
#include "tbs/common.hpp"

namespace tbs {

/// Gauss-Legendre rule on (0, 1).
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(nodes.size()); }
};

QuadratureRule gauss_rule(int count);

/// Index range of the degree-n B-splines (relative to the cell's left node j) that
/// overlap the unit cell [j, j+1]: offsets lo..lo+width-1.
constexpr int cell_offset_lo(int n) { return -(n / 2); }
constexpr int cell_offset_width(int n) { return 2 * (n / 2) + 2; }

/// Largest |m - l| for which beta^{n1}_m and beta^{n2}_l overlap with positive measure.
constexpr int overlap_radius(int n1, int n2) { return (n1 + n2 + 2 + 1) / 2 - 1; }

/// Integrals over the unit cell [0, 1] of D^da beta^nb(x - a) * D^db beta^nb(x - b) * beta^np(x - c),
/// a = trial offset, b = test offset, c = parameter offset, all relative to the cell's left node.
struct CellTrilinearTable {
    int nb = 1, np = 1, da = 0, db = 0;
    int lo_b = 0, wb = 0, lo_p = 0, wp = 0;
    std::vector<double> values;

    [[nodiscard]] double operator()(int a, int b, int c) const {
        return values[(static_cast<std::size_t>(a - lo_b) * wb + (b - lo_b)) * wp + (c - lo_p)];
    }
};

/// Integrals over the unit cell of D^da beta^n1(x - a) * D^db beta^n2(x - b).
struct CellBilinearTable {
    int n1 = 1, n2 = 1, da = 0, db = 0;
    int lo1 = 0, w1 = 0, lo2 = 0, w2 = 0;
    std::vector<double> values;

    [[nodiscard]] double operator()(int a, int b) const {
        return values[static_cast<std::size_t>(a - lo1) * w2 + (b - lo2)];
    }
};

CellTrilinearTable cell_trilinear(int nb, int np, int da, int db);
CellBilinearTable cell_bilinear(int n1, int n2, int da, int db);

/// Cells admitted into a kernel sum. Whole line by default; a finite range truncates
/// the integral to the union of cells lo..hi (cell j spans [j, j+1]).
struct CellRange {
    long lo = -(1L << 40);
    long hi = (1L << 40);
    [[nodiscard]] bool contains(long j) const noexcept { return j >= lo && j <= hi; }
};

/// Translation-invariant trilinear kernel in offsets relative to the test index l:
/// entry (dk, dm) = integral of D^da beta^nb(x - dk) * D^db beta^nb(x) * beta^np(x - dm).
struct UnivariateTrilinearKernel {
    int nb = 1, np = 1, da = 0, db = 0;
    int k_radius = 1;
    int m_radius = 1;
    std::vector<double> table;  // (2 k_radius + 1) x (2 m_radius + 1), row-major

    [[nodiscard]] int k_width() const noexcept { return 2 * k_radius + 1; }
    [[nodiscard]] int m_width() const noexcept { return 2 * m_radius + 1; }
    [[nodiscard]] double operator()(int dk, int dm) const {
        return table[static_cast<std::size_t>(dk + k_radius) * m_width() + (dm + m_radius)];
    }
    /// Integration step-scaling exponent: h^(1 - da - db) for unit-to-physical conversion.
    [[nodiscard]] int step_exponent() const noexcept { return 1 - da - db; }
};

UnivariateTrilinearKernel trilinear_kernel(int nb, int np, int da, int db);
/// Same kernel with the integral restricted to the cells in `range`, for test index `l`.
UnivariateTrilinearKernel trilinear_kernel_truncated(int nb, int np, int da, int db, long l, CellRange range);
UnivariateTrilinearKernel trilinear_kernel_truncated(const CellTrilinearTable& cell, long l, CellRange range);

/// entry j = integral of D^da beta^n1(x - j) * D^db beta^n2(x).
struct UnivariateBilinearKernel {
    int n1 = 1, n2 = 1, da = 0, db = 0;
    int radius = 1;
    std::vector<double> table;

    [[nodiscard]] int width() const noexcept { return 2 * radius + 1; }
    [[nodiscard]] double operator()(int j) const { return table[static_cast<std::size_t>(j + radius)]; }
};

UnivariateBilinearKernel bilinear_kernel(int n1, int n2, int da, int db);
UnivariateBilinearKernel bilinear_kernel_truncated(const CellBilinearTable& cell, long l, CellRange range);

/// Eq.-style separable composition of the stiffness and mass kernels:
/// stiffness = sum over axes a of (prod h / h_a^2) * w_a (x) f_b (b != a), mass = (prod h) * prod f_b.
struct SeparableKernelSet {
    int dim = 1;
    int nb = 1, np = 1;
    std::array<double, kMaxDim> step{1.0, 1.0, 1.0};
    UnivariateTrilinearKernel f;  // undifferentiated
    UnivariateTrilinearKernel w;  // both basis factors differentiated
    std::array<double, kMaxDim> stiffness_scale{0.0, 0.0, 0.0};
    double mass_scale = 1.0;

    struct Term {
        int differentiated_axis;  // -1 for the mass term
        double scale;
    };
    [[nodiscard]] std::vector<Term> stiffness_terms() const;
};

SeparableKernelSet compose_separable(const UnivariateTrilinearKernel& f, const UnivariateTrilinearKernel& w,
                                     std::array<double, kMaxDim> step, int dim);

/// Materialize the d-dimensional stencil over k-offsets for constant parameter fields
/// (diffusion `d_value`, absorption `m_value`). Test and inspection aid only.
Tensor<double> materialize_stencil(const SeparableKernelSet& set, double d_value, double m_value);

/// Axis-aligned boundary plane x_axis = offset (in grid units).
struct Face {
    std::array<double, kMaxDim> normal{1.0, 0.0, 0.0};
    double offset = 0.0;
};

/// Separable surface kernel of a face: rank-1 normal factor beta(x_f - k) beta(x_f - l)
/// times undifferentiated bilinear kernels along the tangential axes.
struct FaceKernel {
    int axis = 0;
    int first = 0;                       // node index of normal_values[0]
    std::vector<double> normal_values;   // beta^n(x_f - k), zero tails trimmed
    UnivariateBilinearKernel tangential; // same kernel on every tangential axis

    [[nodiscard]] double normal(int k, int l) const;
};

FaceKernel boundary_face_kernel(const BSplineBasis& basis, const Face& face);

/// Per-axis, position-dependent kernels truncated to the grid's cells [0, nodes-2].
/// Position p corresponds to coefficient index l = p - pad.
struct AxisKernels {
    bool used = false;
    int nodes = 1;
    int nb = 1, np = 1, ns = 1;
    int pad = 0, pad_p = 0, pad_s = 0;
    int positions = 1;
    int k_radius = 0, m_radius = 0, s_radius = 0;
    double h = 1.0;

    std::vector<double> f, w;          // [p][dk][dm]
    std::vector<double> mass;          // [p][dk], bilinear (nb, nb)
    std::vector<double> source;        // [p][dj], bilinear (ns -> nb)
    std::vector<double> integral;      // [p], integral of beta_l over the axis
    std::vector<double> face_lo, face_hi;  // [p][dk], beta(x_f - k) beta(x_f - l)
    std::vector<char> full;            // [p], truncated kernel equals the free-space kernel

    [[nodiscard]] int k_width() const noexcept { return 2 * k_radius + 1; }
    [[nodiscard]] int m_width() const noexcept { return 2 * m_radius + 1; }
    [[nodiscard]] int s_width() const noexcept { return 2 * s_radius + 1; }
    [[nodiscard]] const double* f_at(int p) const { return f.data() + static_cast<std::size_t>(p) * k_width() * m_width(); }
    [[nodiscard]] const double* w_at(int p) const { return w.data() + static_cast<std::size_t>(p) * k_width() * m_width(); }
};

AxisKernels build_axis_kernels(int nodes, bool used, double h, int nb, int np, int ns);

}  // namespace tbs
