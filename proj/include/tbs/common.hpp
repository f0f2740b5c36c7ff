#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace tbs {

using Index = std::ptrdiff_t;

enum class ErrorKind {
    DegreeRange,
    Smoothness,
    InputValidation,
    OutOfDomain,
    QuadratureRange,
    UnsupportedGeometry,
    EmptyDomain,
    Misuse,
    ExtentMismatch,
    Resource,
    IndefiniteOperator,
    Divergence,
    Configuration,
    Format,
    Usage,
    Determinism,
};

const char* to_string(ErrorKind kind);

/// Library-wide exception. The kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

    [[nodiscard]] bool is_numerical() const noexcept {
        return kind_ == ErrorKind::IndefiniteOperator || kind_ == ErrorKind::Divergence;
    }

private:
    ErrorKind kind_;
};

inline constexpr int kMaxDegree = 5;
inline constexpr int kMaxDim = 3;

inline void check_degree(int n) {
    if (n < 0 || n > kMaxDegree) {
        throw Error(ErrorKind::DegreeRange,
                    "B-spline degree " + std::to_string(n) + " outside supported range 0..5");
    }
}

/// Row-major extents of a d-dimensional array. Unused trailing axes have extent 1.
struct Extents {
    int dim = 1;
    std::array<int, kMaxDim> n{1, 1, 1};

    Extents() = default;
    Extents(int d, std::array<int, kMaxDim> sizes) : dim(d), n(sizes) {
        for (int a = d; a < kMaxDim; ++a) n[a] = 1;
    }

    [[nodiscard]] Index size() const noexcept {
        return static_cast<Index>(n[0]) * n[1] * n[2];
    }
    [[nodiscard]] Index index(int i, int j, int k) const noexcept {
        return (static_cast<Index>(i) * n[1] + j) * n[2] + k;
    }
    [[nodiscard]] Index stride(int axis) const noexcept {
        Index s = 1;
        for (int a = kMaxDim - 1; a > axis; --a) s *= n[a];
        return s;
    }
    friend bool operator==(const Extents&, const Extents&) = default;
};

std::string to_string(const Extents& e);

/// Dense d-dimensional array of reals, row-major, backed by an Eigen vector.
template <typename Scalar>
struct Tensor {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Extents extents;
    Vector data;

    Tensor() = default;
    explicit Tensor(const Extents& e, Scalar fill = Scalar(0))
        : extents(e), data(Vector::Constant(e.size(), fill)) {}
    Tensor(const Extents& e, Vector values) : extents(e), data(std::move(values)) {
        if (data.size() != extents.size()) {
            throw Error(ErrorKind::ExtentMismatch, "tensor data length " + std::to_string(data.size()) +
                                                       " does not match extents " + to_string(extents));
        }
    }

    [[nodiscard]] int dim() const noexcept { return extents.dim; }
    [[nodiscard]] Index size() const noexcept { return data.size(); }

    Scalar& operator()(int i, int j = 0, int k = 0) { return data[extents.index(i, j, k)]; }
    Scalar operator()(int i, int j = 0, int k = 0) const { return data[extents.index(i, j, k)]; }

    [[nodiscard]] bool all_finite() const { return data.allFinite(); }

    template <typename Other>
    [[nodiscard]] Tensor<Other> cast() const {
        return Tensor<Other>(extents, data.template cast<Other>().eval());
    }
};

using CoeffTensor = Tensor<double>;

inline void require_finite(const CoeffTensor& t, const char* what) {
    if (!t.all_finite()) throw Error(ErrorKind::InputValidation, std::string(what) + " contains non-finite values");
}

}  // namespace tbs
