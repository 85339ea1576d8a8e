#pragma once

#include <cstddef>
#include <vector>

namespace flowal {

// Numeric kernels shared by acquisition scoring and evaluation. All functions
// are pure. Grid vectors live on [0,1] with R evenly spaced points.

inline constexpr double kLogClamp = 1e-12;

// Trapezoid sum with unit spacing: sum of (v[n] + v[n+1]) / 2. Selection by
// argmax is unaffected by the missing spacing factor because every candidate
// shares one grid.
double trapz(const std::vector<double>& v);

// trapz scaled by the physical spacing (hi - lo) / (n - 1).
double trapz_physical(const std::vector<double>& v, double lo, double hi);

// sum_n p[n] * (log max(p[n], eps) - log max(q[n], eps)). Entries with
// p[n] = 0 contribute nothing regardless of q[n].
double discrete_kl(const std::vector<double>& p, const std::vector<double>& q);

// H(p) = -sum_n p[n] log max(p[n], eps)
double discrete_entropy(const std::vector<double>& p);

// CE(p, q) = -sum_n p[n] log max(q[n], eps)
double discrete_cross_entropy(const std::vector<double>& p,
                              const std::vector<double>& q);

// Exact 1-D Wasserstein-1 between equal-size empirical measures: mean
// absolute difference of the sorted sample vectors.
double emd_1d(const std::vector<double>& a, const std::vector<double>& b);

// trapz of -v log(max(v, eps)); zero entries contribute 0.
double continuous_entropy(const std::vector<double>& v);

// Closed-form CRPS of a normal forecast N(mu, sigma^2) against outcome y.
double crps_gaussian(double y, double mu, double sigma);

// Sample estimator: mean|s - y| - 1/2 * mean over all ordered pairs |s_i - s_j|.
double crps_samples(double y, const std::vector<double>& samples);

double sample_mean(const std::vector<double>& v);

// Population standard deviation (divide by n).
double sample_std(const std::vector<double>& v);

double normal_cdf(double z);
double normal_pdf(double z);

}  // namespace flowal
