#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "flowal/metrics.hpp"
#include "flowal/rng.hpp"

using namespace flowal;

namespace {

std::vector<double> gaussian_grid(double mu, double sigma, std::size_t r = 200) {
    std::vector<double> v(r);
    for (std::size_t n = 0; n < r; ++n) {
        const double y = static_cast<double>(n) / static_cast<double>(r - 1);
        const double z = (y - mu) / sigma;
        v[n] = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
    }
    return v;
}

std::vector<double> random_simplex(RngStream& rng, std::size_t n) {
    std::vector<double> v(n);
    double s = 0.0;
    for (double& x : v) {
        x = rng.uniform() + 1e-6;
        s += x;
    }
    for (double& x : v) x /= s;
    return v;
}

}  // namespace

TEST_CASE("trapz follows the half-sum formula") {
    CHECK(trapz({1, 1, 1}) == doctest::Approx(2.0));
    CHECK(trapz({0, 0, 0}) == doctest::Approx(0.0));
    CHECK(trapz({0.5, 1.0, 0.5}) == doctest::Approx(1.5));
    CHECK_THROWS_AS((void)trapz({1.0}), std::invalid_argument);
    // physical spacing: unit box [0,1] sampled at 3 points
    CHECK(trapz_physical({1, 1, 1}, 0.0, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("discrete_kl hand values and conventions") {
    CHECK(discrete_kl({0.2, 0.8}, {0.2, 0.8}) == doctest::Approx(0.0));
    CHECK(discrete_kl({1, 0}, {0.5, 0.5}) == doctest::Approx(std::log(2.0)));
    CHECK(discrete_kl({0.5, 0.5}, {0.25, 0.75}) ==
          doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)));
    // zero-vs-zero entries contribute 0
    CHECK(discrete_kl({0, 1}, {0, 1}) == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)discrete_kl({1, 0}, {1, 0, 0}), std::invalid_argument);
}

TEST_CASE("discrete_kl nonnegative on equal-mass vectors") {
    RngStream rng(301);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng.uniform_below(64);
        auto p = random_simplex(rng, n);
        auto q = random_simplex(rng, n);
        const double kl = discrete_kl(p, q);
        CHECK(kl >= -1e-12);
        CHECK(std::isfinite(kl));
    }
}

TEST_CASE("kl/entropy/cross-entropy expansion holds to rounding") {
    RngStream rng(302);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.uniform_below(200);
        std::vector<double> pk(n), other(n);
        for (double& x : pk) x = rng.uniform() * 3.0;
        for (double& x : other) x = rng.uniform() * 3.0;
        std::vector<double> pbar(n);
        for (std::size_t i = 0; i < n; ++i) pbar[i] = 0.5 * (pk[i] + other[i]);
        const double lhs = discrete_kl(pk, pbar);
        const double rhs = -discrete_entropy(pk) + discrete_cross_entropy(pk, pbar);
        CHECK(std::fabs(lhs - rhs) < 1e-10);
    }
}

TEST_CASE("kl-vs-entropy-difference terms disagree on non-degenerate pairs") {
    // The per-sample disagreement term KL(p_k, pbar) = -H(p_k) + CE(p_k, pbar)
    // swaps the averaging distribution in the cross term relative to
    // H(pbar) - H(p_k); on random pairs the two never coincide.
    RngStream rng(303);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 16;
        std::vector<double> pk(n), other(n);
        for (double& x : pk) x = 0.1 + rng.uniform();
        for (double& x : other) x = 0.1 + rng.uniform();
        std::vector<double> pbar(n);
        for (std::size_t i = 0; i < n; ++i) pbar[i] = 0.5 * (pk[i] + other[i]);
        const double balsa_term = discrete_kl(pk, pbar);
        const double bald_term = discrete_entropy(pbar) - discrete_entropy(pk);
        CHECK(std::fabs(balsa_term - bald_term) > 1e-9);
    }
}

TEST_CASE("emd_1d hand values") {
    CHECK(emd_1d({0.5, 0.2}, {0.2, 0.5}) == doctest::Approx(0.0));
    CHECK(emd_1d({0}, {1}) == doctest::Approx(1.0));
    CHECK(emd_1d({0, 1}, {1, 2}) == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)emd_1d({}, {}), std::invalid_argument);
    CHECK_THROWS_AS((void)emd_1d({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("emd_1d metric laws and translation invariance") {
    RngStream rng(304);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.uniform_below(30);
        std::vector<double> a(n), b(n), c(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal() * 2.0 + 0.5;
            c[i] = rng.normal() - 1.0;
        }
        const double ab = emd_1d(a, b);
        const double ba = emd_1d(b, a);
        const double ac = emd_1d(a, c);
        const double cb = emd_1d(c, b);
        CHECK(ab == doctest::Approx(ba));
        CHECK(emd_1d(a, a) == doctest::Approx(0.0));
        CHECK(ab <= ac + cb + 1e-12);
        CHECK(ab >= 0.0);

        const double shift = rng.normal() * 3.0;
        std::vector<double> as = a, bs = b;
        for (double& x : as) x += shift;
        for (double& x : bs) x += shift;
        CHECK(emd_1d(as, bs) == doctest::Approx(ab).epsilon(1e-12));
    }
}

TEST_CASE("emd_1d equals brute-force min-cost matching on small sets") {
    RngStream rng(305);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.uniform_below(4);  // up to 5 points
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.uniform();
            b[i] = rng.uniform();
        }
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        double best = 1e300;
        do {
            double cost = 0.0;
            for (std::size_t i = 0; i < n; ++i) cost += std::fabs(a[i] - b[perm[i]]);
            best = std::min(best, cost / static_cast<double>(n));
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(emd_1d(a, b) == doctest::Approx(best).epsilon(1e-10));
    }
}

TEST_CASE("continuous_entropy values") {
    std::vector<double> ones(200, 1.0);
    CHECK(continuous_entropy(ones) == doctest::Approx(0.0));
    std::vector<double> zeros(200, 0.0);
    CHECK(continuous_entropy(zeros) == doctest::Approx(0.0));

    // Gaussian on the unit grid: physical-spacing entropy matches the
    // analytic differential entropy 0.5*ln(2*pi*e*sigma^2)
    const double sigma = 0.05;
    auto v = gaussian_grid(0.5, sigma);
    const double phys = continuous_entropy(v) / 199.0;
    const double analytic = 0.5 * std::log(2.0 * std::numbers::pi *
                                           std::numbers::e * sigma * sigma);
    CHECK(analytic == doctest::Approx(-1.5768).epsilon(1e-3));
    CHECK(std::fabs(phys - analytic) < 0.02);

    // wider Gaussian => strictly larger entropy
    const double e1 = continuous_entropy(gaussian_grid(0.5, 0.02));
    const double e2 = continuous_entropy(gaussian_grid(0.5, 0.05));
    const double e3 = continuous_entropy(gaussian_grid(0.5, 0.1));
    CHECK(e1 < e2);
    CHECK(e2 < e3);
}

TEST_CASE("crps_gaussian closed-form values") {
    CHECK(crps_gaussian(0.0, 0.0, 1.0) ==
          doctest::Approx(2.0 * normal_pdf(0.0) - 1.0 / std::sqrt(std::numbers::pi))
              .epsilon(1e-12));
    CHECK(crps_gaussian(0.0, 0.0, 1.0) == doctest::Approx(0.23369497).epsilon(1e-6));
    CHECK(crps_gaussian(1.0, 0.0, 1e-6) == doctest::Approx(1.0).epsilon(1e-4));
    // positive homogeneity
    RngStream rng(306);
    for (int i = 0; i < 100; ++i) {
        const double y = rng.normal(), mu = rng.normal(), s = 0.1 + rng.uniform();
        CHECK(crps_gaussian(2 * y, 2 * mu, 2 * s) ==
              doctest::Approx(2.0 * crps_gaussian(y, mu, s)).epsilon(1e-10));
        CHECK(crps_gaussian(y, mu, s) >= 0.0);
    }
    CHECK_THROWS_AS((void)crps_gaussian(0, 0, 0), std::invalid_argument);
}

TEST_CASE("crps_samples hand values and consistency with the closed form") {
    CHECK(crps_samples(1.0, {1.0, 1.0, 1.0}) == doctest::Approx(0.0));
    CHECK(crps_samples(1.0, {0.0, 2.0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS((void)crps_samples(0.0, {1.0}), std::invalid_argument);

    RngStream rng(307);
    const double mu = 0.3, sigma = 0.8;
    std::vector<double> s(10000);
    for (double& x : s) x = mu + sigma * rng.normal();
    for (double y : {-0.5, 0.3, 1.5}) {
        const double est = crps_samples(y, s);
        const double exact = crps_gaussian(y, mu, sigma);
        CHECK(std::fabs(est - exact) / exact < 0.02);
    }
}

TEST_CASE("sample moments") {
    CHECK(sample_mean({1, 2, 3, 4}) == doctest::Approx(2.5));
    CHECK(sample_std({-0.1, 0.1}) == doctest::Approx(0.1));
    CHECK(sample_std({5, 5, 5, 5}) == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)sample_std({1.0}), std::invalid_argument);
}
