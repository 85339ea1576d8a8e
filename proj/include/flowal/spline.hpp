#pragma once

#include <cstddef>
#include <vector>

namespace flowal {

// Monotone rational-quadratic spline on [-bound, bound], identity outside.
// Knot positions are stored cumulatively; derivatives include the two
// boundary values pinned to 1 so the transform is C1 at the tails.
struct SplineParams {
    std::vector<double> xk;  // K+1 input knots, xk[0] = -bound, xk[K] = bound
    std::vector<double> yk;  // K+1 output knots, same endpoints
    std::vector<double> dk;  // K+1 derivatives, dk[0] = dk[K] = 1
    double bound = 4.0;

    std::size_t bins() const { return xk.empty() ? 0 : xk.size() - 1; }
};

struct SplineDefaults {
    std::size_t bins = 8;
    double bound = 4.0;
    double min_width = 1e-3;
    double min_height = 1e-3;
    double min_derivative = 1e-3;
};

// Shift added to raw derivative params so that raw = 0 yields derivative 1:
// softplus(raw + shift) + min_derivative with shift = softplus^-1(1 - min_d).
double derivative_shift(double min_derivative);

// Build normalized knots from 3K-1 raw conditioner outputs laid out as
// [K widths | K heights | K-1 interior derivatives].
SplineParams make_spline_params(const double* raw, const SplineDefaults& def);

struct SplineEval {
    double value;
    double log_deriv;  // log d(output)/d(input)
};

// Data-to-base direction: direct rational-quadratic evaluation.
SplineEval spline_forward(const SplineParams& p, double x);

// Base-to-data direction: per-bin quadratic solve.
SplineEval spline_inverse(const SplineParams& p, double y);

}  // namespace flowal
