#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "tbs/assembly.hpp"
#include "tbs/domain.hpp"
#include "tbs/kernels.hpp"

namespace tbs {

enum class Strategy { OnTheFly, BlockTensor, Sparse };

Strategy parse_strategy(const std::string& name);
const char* to_string(Strategy s);

/// Everything that defines the bilinear form: domain, degrees, parameter fields
/// (diffusion d and absorption mu, both of degree np) and surface terms.
struct FormData {
    Domain domain;
    int nb = 1;
    int np = 1;
    SplineField d;
    SplineField mu;
    SurfaceModel surface;
};

/// Analytic cost of one operator application.
struct OpStats {
    double flops = 0.0;
    double bytes_read = 0.0;
    double bytes_written = 0.0;
    double seconds = 0.0;
};

/// Output-block shape of the on-the-fly gather, in coefficient positions per axis.
struct BlockShape {
    std::array<int, kMaxDim> extent{4, 4, 16};
};

inline constexpr double kDefaultMemoryBudget = 16.0 * (1ull << 30);

/// F(c) = t on the padded coefficient grid. Inactive unknowns are treated as zero on
/// input and produce zero output.
template <typename Scalar>
class SystemOperator {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    virtual ~SystemOperator() = default;

    [[nodiscard]] const Extents& extents() const noexcept { return nodes_.extents; }
    [[nodiscard]] const NodeClassification& nodes() const noexcept { return nodes_; }
    [[nodiscard]] Index size() const noexcept { return nodes_.extents.size(); }
    [[nodiscard]] virtual Strategy strategy() const noexcept = 0;

    void apply(const Vector& c, Vector& t) const;
    [[nodiscard]] Tensor<Scalar> apply(const Tensor<Scalar>& c) const;

    /// Diagonal entries P^{ll}; inactive entries are 1.
    [[nodiscard]] virtual Vector diagonal() const = 0;
    [[nodiscard]] virtual OpStats stats() const = 0;
    /// Bytes held by the operator beyond the shared inputs.
    [[nodiscard]] virtual double storage_bytes() const = 0;

    void set_threads(int threads) noexcept { threads_ = threads; }
    [[nodiscard]] int threads() const noexcept { return threads_; }

protected:
    explicit SystemOperator(NodeClassification nodes);
    virtual void apply_active(const Vector& c, Vector& t) const = 0;

    NodeClassification nodes_;
    std::vector<Index> inactive_;
    int threads_ = 0;
};

/// Matrix-free operator: separable kernels for nodes whose support is not cut by the
/// mask, stored element-gathered stencils for the rest.
template <typename Scalar>
class OnTheFlyOperator final : public SystemOperator<Scalar> {
public:
    using Vector = typename SystemOperator<Scalar>::Vector;

    explicit OnTheFlyOperator(const FormData& form, BlockShape blocks = {});

    [[nodiscard]] Strategy strategy() const noexcept override { return Strategy::OnTheFly; }
    [[nodiscard]] Vector diagonal() const override;
    [[nodiscard]] OpStats stats() const override;
    [[nodiscard]] double storage_bytes() const override;

    /// Stencil width (2 nb + 1) on used axes, 1 otherwise.
    [[nodiscard]] std::array<int, kMaxDim> stencil_extent() const noexcept {
        std::array<int, kMaxDim> kw{1, 1, 1};
        for (int a = 0; a < dim_; ++a) kw[a] = kw_[a + first_axis_];
        return kw;
    }
    [[nodiscard]] int stencil_size() const noexcept { return kw_[0] * kw_[1] * kw_[2]; }
    /// Writes every node's stencil (row l, offsets k - l in row-major order) into `out`.
    void stencils(Scalar* out) const;
    [[nodiscard]] Index boundary_stencil_count() const noexcept { return static_cast<Index>(boundary_index_.size()); }

protected:
    void apply_active(const Vector& c, Vector& t) const override;

private:
    enum class Mode { Apply, Stencil, Diagonal };
    void run(Mode mode, const Scalar* c, Scalar* out) const;
    void run_block(Mode mode, const std::array<int, kMaxDim>& lo, const std::array<int, kMaxDim>& hi, const Scalar* c,
                   Scalar* out) const;
    void apply_fused(const std::array<int, kMaxDim>& lo, const std::array<int, kMaxDim>& B, int Q2, const Scalar* c,
                     Scalar* out) const;
    Scalar contract_stencil(const Scalar* stencil, const std::array<int, kMaxDim>& p, const Scalar* c) const;
    Scalar face_apply(const std::array<int, kMaxDim>& p, const Scalar* c) const;
    void build_boundary_stencils(const FormData& form);
    [[nodiscard]] const Scalar* stored_stencil(Index node) const;

    // Per-axis members use right-aligned axes: a d-dimensional grid occupies internal axes
    // 3-d..2, so the contiguous storage axis is always the innermost loop. Flat node order
    // is unchanged by this relabelling.
    int dim_ = 1;
    int first_axis_ = 2;
    int nb_ = 1;
    Extents ext_;  // padded coefficient extents, right-aligned
    std::array<AxisKernels, kMaxDim> axes_;
    std::array<int, kMaxDim> kw_{1, 1, 1};
    std::array<int, kMaxDim> mw_{1, 1, 1};
    std::array<double, kMaxDim> stiffness_scale_{0.0, 0.0, 0.0};
    double volume_ = 1.0;
    std::array<std::array<double, 2>, kMaxDim> edge_sigma_{};
    std::array<double, kMaxDim> face_scale_{0.0, 0.0, 0.0};
    Extents field_extents_;
    Vector d_, mu_;
    std::array<std::vector<Scalar>, kMaxDim> f_, w_, mass_, face_lo_, face_hi_;
    std::vector<Scalar> ft2_, wt2_;  // axis-2 tables as [p][dm][dk]
    std::vector<Index> boundary_index_;   // sorted node indices with stored stencils
    std::vector<Scalar> boundary_stencil_;
    BlockShape blocks_;
};

/// Precomputed per-node stencils (N x (2 nb + 1)^d values).
template <typename Scalar>
class BlockTensorOperator final : public SystemOperator<Scalar> {
public:
    using Vector = typename SystemOperator<Scalar>::Vector;

    explicit BlockTensorOperator(const FormData& form, double memory_budget = kDefaultMemoryBudget);

    /// Bytes the stencil array would need for this form.
    static double required_bytes(const FormData& form);

    [[nodiscard]] Strategy strategy() const noexcept override { return Strategy::BlockTensor; }
    [[nodiscard]] Vector diagonal() const override;
    [[nodiscard]] OpStats stats() const override;
    [[nodiscard]] double storage_bytes() const override;
    [[nodiscard]] const std::vector<Scalar>& stencils() const noexcept { return stencils_; }

protected:
    void apply_active(const Vector& c, Vector& t) const override;

private:
    std::array<int, kMaxDim> kw_{1, 1, 1};
    int ks_ = 1;
    std::vector<Scalar> stencils_;
};

/// Compressed sparse rows assembled from element matrices of all occupied cells.
template <typename Scalar>
class SparseOperator final : public SystemOperator<Scalar> {
public:
    using Vector = typename SystemOperator<Scalar>::Vector;
    using Matrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

    explicit SparseOperator(const FormData& form, double memory_budget = kDefaultMemoryBudget);

    [[nodiscard]] Strategy strategy() const noexcept override { return Strategy::Sparse; }
    [[nodiscard]] Vector diagonal() const override;
    [[nodiscard]] OpStats stats() const override;
    [[nodiscard]] double storage_bytes() const override;
    [[nodiscard]] const Matrix& matrix() const noexcept { return matrix_; }

protected:
    void apply_active(const Vector& c, Vector& t) const override;

private:
    Matrix matrix_;
};

template <typename Scalar>
std::unique_ptr<SystemOperator<Scalar>> make_operator(Strategy strategy, const FormData& form,
                                                      double memory_budget = kDefaultMemoryBudget);

/// Element-gathered global matrix in double precision over all padded positions
/// (inactive rows and columns empty). Shared by the sparse operator and direct solves.
Eigen::SparseMatrix<double, Eigen::RowMajor, int> assemble_matrix(const FormData& form, const NodeClassification& nodes,
                                                                 double memory_budget = kDefaultMemoryBudget);

extern template class SystemOperator<float>;
extern template class SystemOperator<double>;
extern template class OnTheFlyOperator<float>;
extern template class OnTheFlyOperator<double>;
extern template class BlockTensorOperator<float>;
extern template class BlockTensorOperator<double>;
extern template class SparseOperator<float>;
extern template class SparseOperator<double>;

}  // namespace tbs
