#include "tbs/solver.hpp"

#include <chrono>
#include <cmath>

#include <Eigen/SparseCholesky>

#include "tbs/parallel.hpp"

namespace tbs {

Preconditioner parse_preconditioner(const std::string& name) {
    if (name == "none") return Preconditioner::None;
    if (name == "jacobi") return Preconditioner::Jacobi;
    throw Error(ErrorKind::Configuration, "unknown preconditioner '" + name + "'");
}

SolveMethod parse_solve_method(const std::string& name) {
    if (name == "pcg" || name == "cg") return SolveMethod::Pcg;
    if (name == "direct") return SolveMethod::Direct;
    throw Error(ErrorKind::Configuration, "unknown solve method '" + name + "'");
}

void SolveConfig::validate() const {
    if (!(tol > 0.0)) throw Error(ErrorKind::Configuration, "solver tolerance must be positive");
    if (max_iter < 1) throw Error(ErrorKind::Configuration, "max_iter must be at least 1");
    if (coarse_factor == 1 || coarse_factor < 0) {
        throw Error(ErrorKind::Configuration, "coarse factor must be 0 (off) or at least 2");
    }
}

template <typename Scalar>
SolveReport pcg(const SystemOperator<Scalar>& op, const typename SystemOperator<Scalar>::Vector& b,
                typename SystemOperator<Scalar>::Vector& x, const SolveConfig& config) {
    using Vector = typename SystemOperator<Scalar>::Vector;
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const int threads = op.threads();
    auto dot = [&](const Vector& u, const Vector& v) { return deterministic_dot(u, v, threads); };

    if (b.size() != op.size()) throw Error(ErrorKind::ExtentMismatch, "rhs length does not match operator");
    if (!b.allFinite()) throw Error(ErrorKind::InputValidation, "rhs contains non-finite values");
    if (x.size() != op.size()) x = Vector::Zero(op.size());
    const auto& nodes = op.nodes();
    for (Index i = 0; i < x.size(); ++i)
        if (!nodes.is_active(i)) x[i] = Scalar(0);

    SolveReport rep;
    rep.operator_stats = op.stats();
    const double bnorm = std::sqrt(static_cast<double>(dot(b, b)));
    if (bnorm == 0.0) {
        x.setZero();
        rep.converged = true;
        if (config.record_history) {
            rep.residual_history.push_back(0.0);
            rep.energy_history.push_back(0.0);
        }
        return rep;
    }

    Vector inv_diag = Vector::Ones(op.size());
    if (config.precond == Preconditioner::Jacobi) {
        const Vector d = op.diagonal();
        for (Index i = 0; i < d.size(); ++i) {
            if (!nodes.is_active(i)) continue;
            if (!(d[i] > Scalar(0))) {
                throw Error(ErrorKind::IndefiniteOperator,
                            "non-positive diagonal entry " + std::to_string(static_cast<double>(d[i])) + " at node " +
                                std::to_string(i));
            }
            inv_diag[i] = Scalar(1) / d[i];
        }
    }

    Vector r, Ap;
    op.apply(x, Ap);
    r = b - Ap;
    for (Index i = 0; i < r.size(); ++i)
        if (!nodes.is_active(i)) r[i] = Scalar(0);
    Vector z = inv_diag.cwiseProduct(r);
    Vector p = z;
    Scalar rz = dot(r, z);
    double rnorm = std::sqrt(static_cast<double>(dot(r, r)));
    const double r0 = rnorm;
    auto energy = [&]() { return -0.5 * static_cast<double>(dot(x, Vector(r + b))); };
    if (config.record_history) {
        rep.residual_history.push_back(rnorm / bnorm);
        rep.energy_history.push_back(energy());
    }

    int it = 0;
    while (rnorm / bnorm > config.tol && it < config.max_iter) {
        op.apply(p, Ap);
        const Scalar pAp = dot(p, Ap);
        if (!(pAp > Scalar(0))) {
            throw Error(ErrorKind::IndefiniteOperator,
                        "p'Ap = " + std::to_string(static_cast<double>(pAp)) + " at iteration " + std::to_string(it));
        }
        const Scalar alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        ++it;
        rnorm = std::sqrt(static_cast<double>(dot(r, r)));
        if (!std::isfinite(rnorm) || rnorm > 1e3 * r0) {
            throw Error(ErrorKind::Divergence, "residual grew to " + std::to_string(rnorm / r0) +
                                                   " times its initial value at iteration " + std::to_string(it));
        }
        if (config.record_history) {
            rep.residual_history.push_back(rnorm / bnorm);
            rep.energy_history.push_back(energy());
        }
        z = inv_diag.cwiseProduct(r);
        const Scalar rz_new = dot(r, z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    rep.iterations = it;
    rep.relative_residual = rnorm / bnorm;
    rep.converged = rep.relative_residual <= config.tol;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

SolveReport direct_solve(const FormData& form, const Eigen::VectorXd& b, Eigen::VectorXd& x) {
    const auto start = std::chrono::steady_clock::now();
    const NodeClassification nodes = classify_nodes(form.domain, form.nb);
    Eigen::SparseMatrix<double, Eigen::RowMajor, int> a = assemble_matrix(form, nodes);
    if (b.size() != a.rows()) throw Error(ErrorKind::ExtentMismatch, "rhs length does not match system");
    for (Index i = 0; i < a.rows(); ++i)
        if (!nodes.is_active(i)) a.coeffRef(i, i) = 1.0;
    Eigen::SparseMatrix<double, Eigen::ColMajor, int> ac = a;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double, Eigen::ColMajor, int>> ldlt(ac);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::IndefiniteOperator, "LDL^T factorization failed");
    Eigen::VectorXd rhs = b;
    for (Index i = 0; i < rhs.size(); ++i)
        if (!nodes.is_active(i)) rhs[i] = 0.0;
    x = ldlt.solve(rhs);
    SolveReport rep;
    const double bnorm = rhs.norm();
    rep.relative_residual = bnorm > 0 ? (a * x - rhs).norm() / bnorm : 0.0;
    rep.converged = true;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

template SolveReport pcg<float>(const SystemOperator<float>&, const Eigen::VectorXf&, Eigen::VectorXf&,
                                const SolveConfig&);
template SolveReport pcg<double>(const SystemOperator<double>&, const Eigen::VectorXd&, Eigen::VectorXd&,
                                 const SolveConfig&);

}  // namespace tbs
