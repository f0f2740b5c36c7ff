#pragma once

#include <array>
#include <span>
#include <vector>

#include "tbs/common.hpp"

namespace tbs {

/// Centered uniform B-spline of degree n, support (-(n+1)/2, (n+1)/2).
double eval_bspline(int n, double x);

/// r-th derivative of the degree-n B-spline, via the shifted-difference identity
/// D beta^n(x) = beta^{n-1}(x + 1/2) - beta^{n-1}(x - 1/2) applied r times.
double eval_bspline_derivative(int n, double x, int order);

/// Samples beta^n(k) at the integers inside the support, centered (length 2*floor(n/2)+1).
std::vector<double> sampled_bspline(int n);

/// Tensor-product basis on a uniform grid: beta^n(x_1/h_1 - k_1) ... beta^n(x_d/h_d - k_d).
struct BSplineBasis {
    int degree = 3;
    int dim = 1;
    std::array<double, kMaxDim> step{1.0, 1.0, 1.0};

    BSplineBasis() = default;
    BSplineBasis(int n, int d, std::array<double, kMaxDim> h);
    void validate() const;
};

/// Poles and gain of the recursive filter inverting the sampled B-spline.
struct FilterPoles {
    int degree = 0;
    std::vector<double> poles;
    double gain = 1.0;
};

FilterPoles compute_poles(int n);

enum class Extension { Mirror, Zero, Replicate };

Extension parse_extension(const std::string& name);

/// Samples at grid nodes -> expansion coefficients on the same nodes.
CoeffTensor direct_transform(const CoeffTensor& samples, const BSplineBasis& basis,
                             Extension extension = Extension::Mirror);

/// In-place 1-D prefilter of a strided line. Exposed for tests and the field pipeline.
void prefilter_line(std::span<double> line, const FilterPoles& filter, Extension extension);

/// Evaluate sum_k c_k beta^n(x/h - k) at physical points (origin at node 0).
/// Coefficients outside the array are obtained by whole-sample mirroring; points
/// must lie in the node box [0, (N-1) h].
std::vector<double> indirect_transform(const CoeffTensor& coeffs, const BSplineBasis& basis,
                                       std::span<const std::array<double, kMaxDim>> points);

/// Values of the degree-n B-splines that are nonzero at unit coordinate u.
/// Fills weights[i] = beta^n(u - (first + i)) for i < n + 1 and returns first.
int bspline_weights(int n, double u, std::span<double> weights);

/// Same for the derivative of the given order.
int bspline_derivative_weights(int n, double u, int order, std::span<double> weights);

/// Mirror index into [0, n) with whole-sample symmetry (period 2n - 2).
int mirror_index(int k, int n);

}  // namespace tbs
