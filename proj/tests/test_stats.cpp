#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "flowal/rng.hpp"
#include "flowal/stats.hpp"

using namespace flowal;

namespace {

// Independent oracle: enumerate all 2^n sign assignments directly and count
// those with min(W+, W-) at or below the observed one. Only feasible for
// small n, which is exactly where it matters.
double brute_force_wilcoxon_p(const std::vector<double>& diffs) {
    std::vector<double> abs_d;
    std::vector<bool> positive;
    for (double d : diffs) {
        if (d == 0.0) continue;
        abs_d.push_back(std::fabs(d));
        positive.push_back(d > 0.0);
    }
    const std::size_t n = abs_d.size();
    REQUIRE(n >= 1);
    REQUIRE(n <= 20);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return abs_d[a] < abs_d[b]; });
    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
        const double avg = static_cast<double>(i + 1 + j + 1) / 2.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        i = j + 1;
    }

    double w_plus = 0.0, total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        total += rank[t];
        if (positive[t]) w_plus += rank[t];
    }
    const double w_min = std::min(w_plus, total - w_plus);

    std::size_t favorable = 0;
    const std::size_t masks = std::size_t{1} << n;
    for (std::size_t mask = 0; mask < masks; ++mask) {
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            if (mask & (std::size_t{1} << t)) s += rank[t];
        if (std::min(s, total - s) <= w_min + 1e-9) ++favorable;
    }
    return static_cast<double>(favorable) / static_cast<double>(masks);
}

WilcoxonResult run_on_diffs(const std::vector<double>& d) {
    std::vector<double> zeros(d.size(), 0.0);
    return wilcoxon_signed_rank(d, zeros);
}

}  // namespace

TEST_CASE("wilcoxon: identical samples") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    const auto res = wilcoxon_signed_rank(a, a);
    CHECK(res.all_zero);
    CHECK(res.n_used == 0);
    CHECK(res.p_value == 1.0);
}

TEST_CASE("wilcoxon: eight one-sided differences hit the exact tail") {
    // distinct |d|, all positive: W- = 0, p = P(W+ in {0, 36}) = 2 / 2^8
    const std::vector<double> d{1, 2, 3, 4, 5, 6, 7, 8};
    const auto res = run_on_diffs(d);
    CHECK(res.n_used == 8);
    CHECK(res.statistic == 0.0);
    CHECK(res.p_value == doctest::Approx(2.0 / 256.0).epsilon(1e-12));
}

TEST_CASE("wilcoxon: tied magnitudes by hand") {
    // |d| = {1, 1, 2} -> ranks {1.5, 1.5, 3}; signs {+, -, +}
    // W+ = 4.5, W- = 1.5; 6 of the 8 assignments reach min <= 1.5
    const auto res = run_on_diffs({1.0, -1.0, 2.0});
    CHECK(res.statistic == doctest::Approx(1.5));
    CHECK(res.p_value == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("wilcoxon: zero differences are dropped, not ranked") {
    const auto with_zeros = wilcoxon_signed_rank({5.0, 1.0, 4.0, 2.0},
                                                 {5.0, 0.0, 4.0, 0.0});
    const auto without = wilcoxon_signed_rank({1.0, 2.0}, {0.0, 0.0});
    CHECK(with_zeros.n_used == 2);
    CHECK(with_zeros.statistic == without.statistic);
    CHECK(with_zeros.p_value == doctest::Approx(without.p_value).epsilon(1e-12));
}

TEST_CASE("wilcoxon: exact mode matches brute-force enumeration") {
    RngStream rng(20240811);
    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t n = 1 + rng.uniform_below(12);
        std::vector<double> d;
        for (std::size_t i = 0; i < n; ++i) {
            // small integer support forces heavy ties and occasional zeros
            const double v = static_cast<double>(rng.uniform_below(7)) - 3.0;
            d.push_back(v);
        }
        if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; }))
            d[0] = 1.0;
        const auto res = run_on_diffs(d);
        const double oracle = brute_force_wilcoxon_p(d);
        CAPTURE(trial);
        CAPTURE(n);
        CHECK(res.p_value == doctest::Approx(oracle).epsilon(1e-10));
    }
}

TEST_CASE("wilcoxon: symmetric in its arguments") {
    RngStream rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a, b;
        for (int i = 0; i < 9; ++i) {
            a.push_back(rng.normal());
            b.push_back(rng.normal());
        }
        const auto ab = wilcoxon_signed_rank(a, b);
        const auto ba = wilcoxon_signed_rank(b, a);
        CHECK(ab.statistic == ba.statistic);
        CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));
    }
}

TEST_CASE("wilcoxon: normal approximation tracks enumeration at n = 20") {
    RngStream rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> d;
        for (int i = 0; i < 20; ++i) {
            double v = rng.normal();
            if (v == 0.0) v = 0.5;
            d.push_back(v);
        }
        const auto res = run_on_diffs(d);  // n = 20 takes the approximate path
        const double oracle = brute_force_wilcoxon_p(d);
        CHECK(std::fabs(res.p_value - oracle) < 0.025);
    }
}

TEST_CASE("wilcoxon: null calibration of the large-sample path") {
    RngStream rng(424242);
    const int sims = 2000;
    int rejections = 0;
    for (int s = 0; s < sims; ++s) {
        std::vector<double> d;
        for (int i = 0; i < 30; ++i) d.push_back(rng.normal());
        const auto res = run_on_diffs(d);
        CHECK(res.p_value >= 0.0);
        CHECK(res.p_value <= 1.0);
        if (res.p_value <= 0.05) ++rejections;
    }
    const double rate = static_cast<double>(rejections) / sims;
    CHECK(rate > 0.02);
    CHECK(rate < 0.08);
}

TEST_CASE("wilcoxon: input validation") {
    CHECK_THROWS_AS(wilcoxon_signed_rank({1.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(wilcoxon_signed_rank({}, {}), std::invalid_argument);
}

TEST_CASE("holm: hand-worked decisions") {
    {
        // 0.01 <= 0.05/2, then 0.04 <= 0.05/1 -> both rejected
        const auto r = holm_reject({0.04, 0.01}, 0.05);
        CHECK(r[0]);
        CHECK(r[1]);
    }
    {
        // 0.03 > 0.05/2 stops the step-down immediately
        const auto r = holm_reject({0.03, 0.04}, 0.05);
        CHECK_FALSE(r[0]);
        CHECK_FALSE(r[1]);
    }
    {
        const auto r = holm_reject({0.03}, 0.05);
        CHECK(r[0]);
    }
    {
        const auto r = holm_reject({1.0, 1.0, 1.0}, 0.05);
        CHECK(std::none_of(r.begin(), r.end(), [](bool x) { return x; }));
    }
    CHECK_THROWS_AS(holm_reject({}, 0.05), std::invalid_argument);
}

TEST_CASE("holm: rejections form a prefix of the sorted p-values") {
    RngStream rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.uniform_below(10);
        std::vector<double> p;
        for (std::size_t i = 0; i < m; ++i) p.push_back(rng.uniform());
        const auto reject = holm_reject(p, 0.2);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (reject[j] && p[i] < p[j]) CHECK(reject[i]);
        // Holm dominates Bonferroni
        for (std::size_t i = 0; i < m; ++i)
            if (p[i] <= 0.2 / static_cast<double>(m)) CHECK(reject[i]);
    }
}

TEST_CASE("sign test: exact binomial tail") {
    CHECK(sign_test_p(0, 10) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sign_test_p(10, 10) == doctest::Approx(1.0 / 1024.0).epsilon(1e-12));
    // C(10,8)+C(10,9)+C(10,10) = 56
    CHECK(sign_test_p(8, 10) == doctest::Approx(56.0 / 1024.0).epsilon(1e-12));
    // odd n is symmetric around the median
    CHECK(sign_test_p(5, 9) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(sign_test_p(11, 10), std::invalid_argument);
}

TEST_CASE("ranks: two algorithms, one group") {
    const auto t = rank_algorithms({{"a", "d", 0, 1.0}, {"b", "d", 0, 2.0}});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].algorithm == "a");
    CHECK(t.rows[0].rank == 1.0);
    CHECK(t.rows[1].rank == 2.0);
    CHECK(t.mean_rank.at("a") == 1.0);
    CHECK(t.mean_rank.at("b") == 2.0);
}

TEST_CASE("ranks: equal AUCs share the average rank") {
    const auto t = rank_algorithms({{"a", "d", 0, 3.0}, {"b", "d", 0, 3.0}});
    CHECK(t.rows[0].rank == 1.5);
    CHECK(t.rows[1].rank == 1.5);
}

TEST_CASE("ranks: mean over mixed groups") {
    // group (d1, 0): a=1.0 b=2.0 c=3.0 -> ranks 1, 2, 3
    // group (d2, 0): b=0.1 c=0.2 a=0.3 -> a 3, b 1, c 2
    const auto t = rank_algorithms({{"a", "d1", 0, 1.0},
                                    {"b", "d1", 0, 2.0},
                                    {"c", "d1", 0, 3.0},
                                    {"a", "d2", 0, 0.3},
                                    {"b", "d2", 0, 0.1},
                                    {"c", "d2", 0, 0.2}});
    CHECK(t.mean_rank.at("a") == doctest::Approx(2.0));
    CHECK(t.mean_rank.at("b") == doctest::Approx(1.5));
    CHECK(t.mean_rank.at("c") == doctest::Approx(2.5));
    // rows come back sorted by (dataset, seed, algorithm)
    REQUIRE(t.rows.size() == 6);
    CHECK(t.rows[0].dataset == "d1");
    CHECK(t.rows[0].algorithm == "a");
    CHECK(t.rows[3].dataset == "d2");
}

TEST_CASE("ranks: mean ranks always average to (k + 1) / 2") {
    RngStream rng(5);
    const std::vector<std::string> algos{"p", "q", "r", "s"};
    std::vector<AucRecord> recs;
    for (int seed = 0; seed < 6; ++seed)
        for (const auto& a : algos)
            recs.push_back({a, "data", static_cast<std::uint64_t>(seed), rng.normal()});
    const auto t = rank_algorithms(recs);
    double total = 0.0;
    for (const auto& [algo, mean] : t.mean_rank) total += mean;
    CHECK(total / static_cast<double>(algos.size()) ==
          doctest::Approx((algos.size() + 1.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("ranks: incomplete groups are reported by name") {
    CHECK_THROWS_WITH_AS(
        rank_algorithms({{"a", "d", 0, 1.0}, {"b", "d", 0, 2.0}, {"a", "d", 1, 1.0}}),
        doctest::Contains("'b'"), std::invalid_argument);
    CHECK_THROWS_AS(rank_algorithms({{"a", "d", 0, 1.0}, {"a", "d", 0, 2.0}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(rank_algorithms({}), std::invalid_argument);
}
