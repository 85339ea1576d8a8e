#include "flowal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flowal {

double trapz(const std::vector<double>& v) {
    if (v.size() < 2) throw std::invalid_argument("trapz: need at least 2 points");
    double acc = 0.0;
    for (std::size_t n = 0; n + 1 < v.size(); ++n) acc += 0.5 * (v[n] + v[n + 1]);
    return acc;
}

double trapz_physical(const std::vector<double>& v, double lo, double hi) {
    return trapz(v) * (hi - lo) / static_cast<double>(v.size() - 1);
}

double discrete_kl(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size())
        throw std::invalid_argument("discrete_kl: length mismatch");
    double acc = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) {
        if (p[n] == 0.0) continue;
        acc += p[n] * (std::log(std::max(p[n], kLogClamp)) -
                       std::log(std::max(q[n], kLogClamp)));
    }
    return acc;
}

double discrete_entropy(const std::vector<double>& p) {
    double acc = 0.0;
    for (double x : p) {
        if (x == 0.0) continue;
        acc -= x * std::log(std::max(x, kLogClamp));
    }
    return acc;
}

double discrete_cross_entropy(const std::vector<double>& p,
                              const std::vector<double>& q) {
    if (p.size() != q.size())
        throw std::invalid_argument("discrete_cross_entropy: length mismatch");
    double acc = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) {
        if (p[n] == 0.0) continue;
        acc -= p[n] * std::log(std::max(q[n], kLogClamp));
    }
    return acc;
}

double emd_1d(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty()) throw std::invalid_argument("emd_1d: empty sample set");
    if (a.size() != b.size()) throw std::invalid_argument("emd_1d: size mismatch");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) acc += std::fabs(sa[i] - sb[i]);
    return acc / static_cast<double>(sa.size());
}

double continuous_entropy(const std::vector<double>& v) {
    if (v.size() < 2)
        throw std::invalid_argument("continuous_entropy: need at least 2 points");
    std::vector<double> w(v.size());
    for (std::size_t n = 0; n < v.size(); ++n)
        w[n] = v[n] == 0.0 ? 0.0 : -v[n] * std::log(std::max(v[n], kLogClamp));
    return trapz(w);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double crps_gaussian(double y, double mu, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("crps_gaussian: sigma must be > 0");
    const double z = (y - mu) / sigma;
    return sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) -
                    1.0 / std::sqrt(std::numbers::pi));
}

double crps_samples(double y, const std::vector<double>& samples) {
    const std::size_t n = samples.size();
    if (n < 2) throw std::invalid_argument("crps_samples: need at least 2 samples");
    std::vector<double> s = samples;
    std::sort(s.begin(), s.end());
    double mad = 0.0;
    double pair_sum = 0.0;  // sum over ordered pairs |s_i - s_j|
    for (std::size_t i = 0; i < n; ++i) {
        mad += std::fabs(s[i] - y);
        pair_sum += s[i] * (2.0 * static_cast<double>(i) -
                            static_cast<double>(n) + 1.0);
    }
    pair_sum *= 2.0;
    return mad / static_cast<double>(n) -
           0.5 * pair_sum / (static_cast<double>(n) * static_cast<double>(n));
}

double sample_mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("sample_mean: empty");
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) throw std::invalid_argument("sample_std: need at least 2 values");
    const double m = sample_mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace flowal
