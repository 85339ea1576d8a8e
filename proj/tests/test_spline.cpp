#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "flowal/rng.hpp"
#include "flowal/spline.hpp"

using namespace flowal;

namespace {

SplineParams random_params(RngStream& rng, const SplineDefaults& def) {
    std::vector<double> raw(3 * def.bins - 1);
    for (double& v : raw) v = 1.5 * rng.normal();
    return make_spline_params(raw.data(), def);
}

}  // namespace

TEST_CASE("zero raw parameters give the exact identity") {
    SplineDefaults def;
    std::vector<double> raw(3 * def.bins - 1, 0.0);
    const SplineParams p = make_spline_params(raw.data(), def);

    REQUIRE(p.bins() == def.bins);
    CHECK(p.xk.front() == -4.0);
    CHECK(p.xk.back() == 4.0);
    for (std::size_t k = 0; k <= def.bins; ++k) {
        CHECK(p.dk[k] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(p.xk[k] == doctest::Approx(p.yk[k]).epsilon(1e-14));
    }

    for (double x : {-3.9, -1.0, -0.25, 0.0, 0.7, 2.0, 3.999}) {
        const SplineEval e = spline_forward(p, x);
        CHECK(e.value == doctest::Approx(x).epsilon(1e-13));
        CHECK(std::fabs(e.log_deriv) < 1e-13);
    }
    // y = 0 sits exactly on a knot of the uniform partition
    CHECK(spline_forward(p, 0.0).value == 0.0);
    CHECK(spline_forward(p, 0.0).log_deriv == 0.0);
}

TEST_CASE("derivative parametrization is 1 at raw zero") {
    for (double min_d : {1e-3, 1e-2}) {
        const double shift = derivative_shift(min_d);
        const double d = min_d + std::log1p(std::exp(shift));
        CHECK(d == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("knot structure is monotone and bounded") {
    RngStream rng(401);
    SplineDefaults def;
    for (int trial = 0; trial < 200; ++trial) {
        const SplineParams p = random_params(rng, def);
        for (std::size_t k = 0; k < def.bins; ++k) {
            CHECK(p.xk[k + 1] - p.xk[k] > 2.0 * def.bound * def.min_width * 0.99);
            CHECK(p.yk[k + 1] - p.yk[k] > 2.0 * def.bound * def.min_height * 0.99);
            CHECK(p.dk[k] > def.min_derivative * 0.99);
        }
        CHECK(p.xk.front() == -def.bound);
        CHECK(p.xk.back() == def.bound);
    }
}

TEST_CASE("forward is strictly increasing and maps the support onto itself") {
    RngStream rng(402);
    SplineDefaults def;
    for (int trial = 0; trial < 50; ++trial) {
        const SplineParams p = random_params(rng, def);
        double prev = -1e300;
        for (int i = 0; i <= 400; ++i) {
            const double x = -def.bound + 2.0 * def.bound * i / 400.0;
            const double y = spline_forward(p, x).value;
            CHECK(y >= prev);
            CHECK(y >= -def.bound);
            CHECK(y <= def.bound);
            prev = y;
        }
    }
}

TEST_CASE("round trip recovers the input") {
    RngStream rng(403);
    SplineDefaults def;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const SplineParams p = random_params(rng, def);
        const double x = -def.bound + 2.0 * def.bound * rng.uniform();
        const SplineEval fwd = spline_forward(p, x);
        const SplineEval inv = spline_inverse(p, fwd.value);
        worst = std::max(worst, std::fabs(inv.value - x));
        CHECK(std::fabs(inv.value - x) < 1e-9);
        CHECK(std::fabs(inv.log_deriv + fwd.log_deriv) < 1e-8);
    }
    CHECK(worst < 1e-9);

    // and the other composition order, on the sampling path
    for (int trial = 0; trial < 1000; ++trial) {
        const SplineParams p = random_params(rng, def);
        const double z = -def.bound + 2.0 * def.bound * rng.uniform();
        const double y = spline_inverse(p, z).value;
        CHECK(std::fabs(spline_forward(p, y).value - z) < 1e-9);
    }
}

TEST_CASE("log derivative matches finite differences") {
    RngStream rng(404);
    SplineDefaults def;
    const double h = 1e-6;
    for (int trial = 0; trial < 300; ++trial) {
        const SplineParams p = random_params(rng, def);
        const double x = -3.5 + 7.0 * rng.uniform();
        const double fd = (spline_forward(p, x + h).value -
                           spline_forward(p, x - h).value) / (2.0 * h);
        const double an = std::exp(spline_forward(p, x).log_deriv);
        CHECK(std::fabs(fd - an) / std::max({fd, an, 1.0}) < 1e-4);
    }
}

TEST_CASE("tails are the identity") {
    RngStream rng(405);
    SplineDefaults def;
    const SplineParams p = random_params(rng, def);
    for (double x : {-9.0, -4.0, 4.0, 5.5, 100.0}) {
        CHECK(spline_forward(p, x).value == x);
        CHECK(spline_forward(p, x).log_deriv == 0.0);
        CHECK(spline_inverse(p, x).value == x);
        CHECK(spline_inverse(p, x).log_deriv == 0.0);
    }
}
