#include "tbs/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace tbs {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DegreeRange: return "degree-range error";
        case ErrorKind::Smoothness: return "smoothness error";
        case ErrorKind::InputValidation: return "input-validation error";
        case ErrorKind::OutOfDomain: return "out-of-domain error";
        case ErrorKind::QuadratureRange: return "quadrature-range error";
        case ErrorKind::UnsupportedGeometry: return "unsupported-geometry error";
        case ErrorKind::EmptyDomain: return "empty-domain error";
        case ErrorKind::Misuse: return "misuse error";
        case ErrorKind::ExtentMismatch: return "extent-mismatch error";
        case ErrorKind::Resource: return "resource error";
        case ErrorKind::IndefiniteOperator: return "indefinite-operator error";
        case ErrorKind::Divergence: return "divergence error";
        case ErrorKind::Configuration: return "configuration error";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Usage: return "usage error";
        case ErrorKind::Determinism: return "determinism failure";
    }
    return "error";
}

std::string to_string(const Extents& e) {
    std::ostringstream os;
    os << '[';
    for (int a = 0; a < e.dim; ++a) os << (a ? "x" : "") << e.n[a];
    os << ']';
    return os.str();
}

namespace {

// Recurrence on shifted arguments, obtained from beta^n = beta^0 * beta^{n-1}:
// n beta^n(x) = ((n+1)/2 + x) beta^{n-1}(x + 1/2) + ((n+1)/2 - x) beta^{n-1}(x - 1/2).
double bspline_rec(int n, double x) {
    const double half_support = 0.5 * (n + 1);
    const double ax = std::abs(x);
    if (ax >= half_support) {
        return (n == 0 && ax == 0.5) ? 0.5 : 0.0;
    }
    if (n == 0) return 1.0;
    return ((half_support + x) * bspline_rec(n - 1, x + 0.5) + (half_support - x) * bspline_rec(n - 1, x - 0.5)) /
           n;
}

double binomial(int r, int i) {
    double b = 1.0;
    for (int j = 1; j <= i; ++j) b = b * (r - i + j) / j;
    return b;
}

}  // namespace

double eval_bspline(int n, double x) {
    check_degree(n);
    return bspline_rec(n, std::abs(x));  // even function; |x| keeps it exact under FMA contraction
}

double eval_bspline_derivative(int n, double x, int order) {
    check_degree(n);
    if (order < 0) throw Error(ErrorKind::Misuse, "negative derivative order");
    if (order == 0) return bspline_rec(n, x);
    if (order > n) {
        throw Error(ErrorKind::Smoothness, "derivative of order " + std::to_string(order) +
                                               " requested for a degree-" + std::to_string(n) + " B-spline");
    }
    double sum = 0.0;
    for (int i = 0; i <= order; ++i) {
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        sum += sign * binomial(order, i) * bspline_rec(n - order, x + 0.5 * order - i);
    }
    return sum;
}

std::vector<double> sampled_bspline(int n) {
    check_degree(n);
    const int m = n / 2;
    std::vector<double> b(2 * m + 1);
    for (int k = -m; k <= m; ++k) b[k + m] = bspline_rec(n, k);
    return b;
}

BSplineBasis::BSplineBasis(int n, int d, std::array<double, kMaxDim> h) : degree(n), dim(d), step(h) {
    validate();
}

void BSplineBasis::validate() const {
    check_degree(degree);
    if (dim < 1 || dim > kMaxDim) throw Error(ErrorKind::InputValidation, "dimension must be 1, 2 or 3");
    for (int a = 0; a < dim; ++a) {
        if (!(step[a] > 0.0) || !std::isfinite(step[a])) {
            throw Error(ErrorKind::InputValidation, "grid step must be positive and finite");
        }
    }
}

FilterPoles compute_poles(int n) {
    check_degree(n);
    FilterPoles f;
    f.degree = n;
    if (n < 2) return f;

    const std::vector<double> b = sampled_bspline(n);
    const int deg = static_cast<int>(b.size()) - 1;
    // Companion matrix of the monic polynomial z^m * sum_k b_k z^k.
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -b[i] / b[deg];
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    for (const std::complex<double>& z : solver.eigenvalues()) {
        if (std::abs(z.imag()) < 1e-10 && std::abs(z.real()) < 1.0) f.poles.push_back(z.real());
    }
    std::sort(f.poles.begin(), f.poles.end());
    if (static_cast<int>(f.poles.size()) != n / 2) {
        throw Error(ErrorKind::InputValidation, "pole computation failed for degree " + std::to_string(n));
    }
    for (double z : f.poles) f.gain *= (1.0 - z) * (1.0 - 1.0 / z);
    return f;
}

Extension parse_extension(const std::string& name) {
    if (name == "mirror") return Extension::Mirror;
    if (name == "zero") return Extension::Zero;
    if (name == "replicate") return Extension::Replicate;
    throw Error(ErrorKind::Configuration, "unknown boundary extension '" + name + "'");
}

namespace {

constexpr double kInitTolerance = 1e-12;

double causal_init(std::span<const double> c, double z, Extension ext) {
    const auto n = static_cast<Index>(c.size());
    if (ext == Extension::Zero) return c[0];
    if (ext == Extension::Replicate) return c[0] / (1.0 - z);

    const auto horizon = static_cast<Index>(std::ceil(std::log(kInitTolerance) / std::log(std::abs(z))));
    if (horizon < n) {
        double zn = z;
        double sum = c[0];
        for (Index k = 1; k < horizon; ++k) {
            sum += zn * c[k];
            zn *= z;
        }
        return sum;
    }
    // Exact whole-sample symmetric initialization.
    double zn = z;
    const double iz = 1.0 / z;
    double z2n = std::pow(z, static_cast<double>(n - 1));
    double sum = c[0] + z2n * c[n - 1];
    z2n *= z2n * iz;
    for (Index k = 1; k <= n - 2; ++k) {
        sum += (zn + z2n) * c[k];
        zn *= z;
        z2n *= iz;
    }
    return sum / (1.0 - zn * zn);
}

}  // namespace

void prefilter_line(std::span<double> line, const FilterPoles& filter, Extension ext) {
    const auto n = static_cast<Index>(line.size());
    if (filter.poles.empty() || n < 2) return;
    for (double& v : line) v *= filter.gain;
    for (double z : filter.poles) {
        const double last_input = line[n - 1];
        line[0] = causal_init(line, z, ext);
        for (Index k = 1; k < n; ++k) line[k] += z * line[k - 1];
        const double scale = z / (z * z - 1.0);
        switch (ext) {
            case Extension::Mirror: line[n - 1] = scale * (line[n - 1] + z * line[n - 2]); break;
            case Extension::Zero: line[n - 1] = scale * line[n - 1]; break;
            case Extension::Replicate:
                line[n - 1] = scale * (line[n - 1] + z * last_input / (1.0 - z));
                break;
        }
        for (Index k = n - 2; k >= 0; --k) line[k] = z * (line[k + 1] - line[k]);
    }
}

CoeffTensor direct_transform(const CoeffTensor& samples, const BSplineBasis& basis, Extension ext) {
    basis.validate();
    require_finite(samples, "direct_transform samples");
    if (samples.dim() != basis.dim) {
        throw Error(ErrorKind::ExtentMismatch, "sample dimension does not match basis dimension");
    }
    const FilterPoles filter = compute_poles(basis.degree);
    CoeffTensor out = samples;
    if (filter.poles.empty()) return out;

    const Extents& e = out.extents;
    std::vector<double> line;
    for (int axis = 0; axis < e.dim; ++axis) {
        const int len = e.n[axis];
        if (len < 2) {
            throw Error(ErrorKind::InputValidation, "direct transform needs at least 2 samples per axis");
        }
        const Index stride = e.stride(axis);
        line.resize(len);
        const Index lines = e.size() / len;
        for (Index li = 0; li < lines; ++li) {
            // li enumerates all index tuples with the filtered axis fixed at 0.
            const Index outer = li / stride;
            const Index inner = li % stride;
            const Index base = outer * stride * len + inner;
            for (int k = 0; k < len; ++k) line[k] = out.data[base + k * stride];
            prefilter_line(line, filter, ext);
            for (int k = 0; k < len; ++k) out.data[base + k * stride] = line[k];
        }
    }
    return out;
}

int mirror_index(int k, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    k %= period;
    if (k < 0) k += period;
    return k < n ? k : period - k;
}

int bspline_weights(int n, double u, std::span<double> weights) {
    const int first = static_cast<int>(std::ceil(u - 0.5 * (n + 1)));
    for (int i = 0; i <= n; ++i) weights[i] = bspline_rec(n, u - (first + i));
    return first;
}

int bspline_derivative_weights(int n, double u, int order, std::span<double> weights) {
    const int first = static_cast<int>(std::ceil(u - 0.5 * (n + 1)));
    for (int i = 0; i <= n; ++i) weights[i] = eval_bspline_derivative(n, u - (first + i), order);
    return first;
}

std::vector<double> indirect_transform(const CoeffTensor& coeffs, const BSplineBasis& basis,
                                       std::span<const std::array<double, kMaxDim>> points) {
    basis.validate();
    if (coeffs.dim() != basis.dim) {
        throw Error(ErrorKind::ExtentMismatch, "coefficient dimension does not match basis dimension");
    }
    const int n = basis.degree;
    const Extents& e = coeffs.extents;
    std::vector<double> out;
    out.reserve(points.size());
    std::array<std::array<double, kMaxDegree + 1>, kMaxDim> w{};
    std::array<int, kMaxDim> first{};
    std::array<int, kMaxDim> count{1, 1, 1};
    for (const auto& p : points) {
        for (int a = 0; a < kMaxDim; ++a) {
            if (a >= basis.dim) {
                w[a][0] = 1.0;
                first[a] = 0;
                count[a] = 1;
                continue;
            }
            const double u = p[a] / basis.step[a];
            const double upper = e.n[a] - 1;
            const double slack = 1e-12 * std::max(1.0, upper);
            if (!(u >= -slack && u <= upper + slack)) {
                throw Error(ErrorKind::OutOfDomain, "evaluation point outside the coefficient grid on axis " +
                                                        std::to_string(a));
            }
            first[a] = bspline_weights(n, u, w[a]);
            count[a] = n + 1;
        }
        double sum = 0.0;
        for (int i = 0; i < count[0]; ++i) {
            const int ii = mirror_index(first[0] + i, e.n[0]);
            for (int j = 0; j < count[1]; ++j) {
                const int jj = mirror_index(first[1] + j, e.n[1]);
                const double wij = w[0][i] * w[1][j];
                for (int k = 0; k < count[2]; ++k) {
                    sum += wij * w[2][k] * coeffs(ii, jj, mirror_index(first[2] + k, e.n[2]));
                }
            }
        }
        out.push_back(sum);
    }
    return out;
}

}  // namespace tbs
