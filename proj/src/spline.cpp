#include "flowal/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowal {

namespace {

double softplus(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

void softmax_into(const double* raw, std::size_t n, std::vector<double>& out) {
    double mx = raw[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, raw[i]);
    out.resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(raw[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
}

// Locate the bin so that knots[b] <= v < knots[b+1], clamped to valid bins.
std::size_t find_bin(const std::vector<double>& knots, double v) {
    const auto it = std::upper_bound(knots.begin() + 1, knots.end() - 1, v);
    return static_cast<std::size_t>(it - knots.begin()) - 1;
}

}  // namespace

double derivative_shift(double min_derivative) {
    // softplus^-1(1 - min_d) = log(exp(1 - min_d) - 1)
    return std::log(std::expm1(1.0 - min_derivative));
}

SplineParams make_spline_params(const double* raw, const SplineDefaults& def) {
    const std::size_t K = def.bins;
    if (K < 1) throw std::invalid_argument("make_spline_params: bins < 1");
    SplineParams p;
    p.bound = def.bound;

    std::vector<double> frac;
    softmax_into(raw, K, frac);
    p.xk.resize(K + 1);
    p.xk[0] = -def.bound;
    double cum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double w = def.min_width +
                         (1.0 - static_cast<double>(K) * def.min_width) * frac[k];
        cum += w;
        p.xk[k + 1] = -def.bound + 2.0 * def.bound * cum;
    }
    p.xk[K] = def.bound;

    softmax_into(raw + K, K, frac);
    p.yk.resize(K + 1);
    p.yk[0] = -def.bound;
    cum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double h = def.min_height +
                         (1.0 - static_cast<double>(K) * def.min_height) * frac[k];
        cum += h;
        p.yk[k + 1] = -def.bound + 2.0 * def.bound * cum;
    }
    p.yk[K] = def.bound;

    p.dk.assign(K + 1, 1.0);
    const double shift = derivative_shift(def.min_derivative);
    for (std::size_t k = 1; k < K; ++k)
        p.dk[k] = def.min_derivative + softplus(raw[2 * K + (k - 1)] + shift);
    return p;
}

SplineEval spline_forward(const SplineParams& p, double x) {
    if (x <= -p.bound || x >= p.bound) return {x, 0.0};
    const std::size_t k = find_bin(p.xk, x);
    const double w = p.xk[k + 1] - p.xk[k];
    const double h = p.yk[k + 1] - p.yk[k];
    const double s = h / w;
    const double d0 = p.dk[k], d1 = p.dk[k + 1];
    const double xi = (x - p.xk[k]) / w;
    const double th = xi * (1.0 - xi);
    const double denom = s + (d1 + d0 - 2.0 * s) * th;
    const double value = p.yk[k] + h * (s * xi * xi + d0 * th) / denom;
    const double deriv = s * s *
                         (d1 * xi * xi + 2.0 * s * th + d0 * (1.0 - xi) * (1.0 - xi)) /
                         (denom * denom);
    return {value, std::log(deriv)};
}

SplineEval spline_inverse(const SplineParams& p, double y) {
    if (y <= -p.bound || y >= p.bound) return {y, 0.0};
    const std::size_t k = find_bin(p.yk, y);
    const double w = p.xk[k + 1] - p.xk[k];
    const double h = p.yk[k + 1] - p.yk[k];
    const double s = h / w;
    const double d0 = p.dk[k], d1 = p.dk[k + 1];
    const double delta = y - p.yk[k];
    const double r = d1 + d0 - 2.0 * s;
    const double a = h * (s - d0) + delta * r;
    const double b = h * d0 - delta * r;
    const double c = -s * delta;
    // stable root of a*xi^2 + b*xi + c = 0 in [0,1]
    const double xi = 2.0 * c / (-b - std::sqrt(b * b - 4.0 * a * c));
    const double th = xi * (1.0 - xi);
    const double denom = s + r * th;
    const double deriv = s * s *
                         (d1 * xi * xi + 2.0 * s * th + d0 * (1.0 - xi) * (1.0 - xi)) /
                         (denom * denom);
    return {p.xk[k] + xi * w, -std::log(deriv)};
}

}  // namespace flowal
