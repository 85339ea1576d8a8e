#include "flowal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "flowal/metrics.hpp"

namespace flowal {

namespace {

// Average ranks of |d|, ascending. Returned doubled (so ties at .5 stay
// integral) for the exact dynamic program.
std::vector<long long> doubled_ranks(const std::vector<double>& abs_d) {
    const std::size_t n = abs_d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return abs_d[a] < abs_d[b]; });
    std::vector<long long> r2(n, 0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
        // ranks i+1 .. j+1 averaged; doubled average = (i+1 + j+1)
        const long long avg2 = static_cast<long long>(i + 1 + j + 1);
        for (std::size_t t = i; t <= j; ++t) r2[order[t]] = avg2;
        i = j + 1;
    }
    return r2;
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("wilcoxon_signed_rank: unequal sample sizes");
    if (a.empty()) throw std::invalid_argument("wilcoxon_signed_rank: empty samples");

    std::vector<double> abs_d;
    std::vector<bool> positive;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0.0) continue;
        abs_d.push_back(std::fabs(d));
        positive.push_back(d > 0.0);
    }
    WilcoxonResult res;
    res.n_used = abs_d.size();
    if (abs_d.empty()) {
        res.all_zero = true;
        res.p_value = 1.0;
        return res;
    }

    const auto r2 = doubled_ranks(abs_d);
    long long w_plus2 = 0, total2 = 0;
    for (std::size_t i = 0; i < r2.size(); ++i) {
        total2 += r2[i];
        if (positive[i]) w_plus2 += r2[i];
    }
    const long long w_minus2 = total2 - w_plus2;
    const long long w_min2 = std::min(w_plus2, w_minus2);
    res.statistic = static_cast<double>(w_min2) / 2.0;

    const std::size_t n = abs_d.size();
    if (n < 20) {
        // distribution of W+ (doubled) over all 2^n sign assignments
        std::vector<long double> count(static_cast<std::size_t>(total2) + 1, 0.0L);
        count[0] = 1.0L;
        long long reach = 0;
        for (std::size_t i = 0; i < n; ++i) {
            reach += r2[i];
            for (long long s = reach; s >= r2[i]; --s)
                count[static_cast<std::size_t>(s)] +=
                    count[static_cast<std::size_t>(s - r2[i])];
        }
        long double favorable = 0.0L, all = 0.0L;
        for (long long s = 0; s <= total2; ++s) {
            const long double c = count[static_cast<std::size_t>(s)];
            all += c;
            if (std::min(s, total2 - s) <= w_min2) favorable += c;
        }
        res.p_value = static_cast<double>(favorable / all);
    } else {
        // tie-corrected variance; 0.5 continuity correction toward the mean
        const double w_plus = static_cast<double>(w_plus2) / 2.0;
        const double dn = static_cast<double>(n);
        const double mean = dn * (dn + 1.0) / 4.0;
        double tie_term = 0.0;
        std::vector<double> sorted = abs_d;
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < sorted.size()) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += (t * t * t - t);
            i = j + 1;
        }
        const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
        if (var <= 0.0) {
            res.p_value = 1.0;
            return res;
        }
        const double shift = std::fabs(w_plus - mean);
        const double z = (shift - 0.5) / std::sqrt(var);
        res.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
    }
    return res;
}

std::vector<bool> holm_reject(const std::vector<double>& p_values, double alpha) {
    if (p_values.empty()) throw std::invalid_argument("holm_reject: empty p-values");
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::vector<bool> reject(m, false);
    for (std::size_t i = 0; i < m; ++i) {
        const double threshold = alpha / static_cast<double>(m - i);
        if (p_values[order[i]] <= threshold)
            reject[order[i]] = true;
        else
            break;  // step-down stops at the first failure
    }
    return reject;
}

double sign_test_p(std::size_t wins, std::size_t n) {
    if (wins > n) throw std::invalid_argument("sign_test_p: wins exceed trials");
    // P(X >= wins), X ~ Bin(n, 1/2), exact
    long double total = 0.0L;
    long double coeff = 1.0L;  // C(n, 0)
    for (std::size_t k = 0; k <= n; ++k) {
        if (k >= wins) total += coeff;
        coeff = coeff * static_cast<long double>(n - k) / static_cast<long double>(k + 1);
    }
    return static_cast<double>(total / std::pow(2.0L, static_cast<long double>(n)));
}

RankTable rank_algorithms(const std::vector<AucRecord>& records) {
    if (records.empty()) throw std::invalid_argument("rank_algorithms: no records");

    std::vector<std::string> algorithms;
    for (const auto& r : records)
        if (std::find(algorithms.begin(), algorithms.end(), r.algorithm) ==
            algorithms.end())
            algorithms.push_back(r.algorithm);
    std::sort(algorithms.begin(), algorithms.end());

    std::map<std::pair<std::string, std::uint64_t>, std::vector<const AucRecord*>> groups;
    for (const auto& r : records) groups[{r.dataset, r.seed}].push_back(&r);

    RankTable table;
    std::map<std::string, double> rank_sum;
    std::size_t group_count = 0;
    for (auto& [key, members] : groups) {
        ++group_count;
        std::sort(members.begin(), members.end(),
                  [](const AucRecord* x, const AucRecord* y) {
                      return x->algorithm < y->algorithm;
                  });
        for (const auto& algo : algorithms) {
            const auto hits = std::count_if(
                members.begin(), members.end(),
                [&](const AucRecord* r) { return r->algorithm == algo; });
            if (hits != 1)
                throw std::invalid_argument(
                    "rank_algorithms: algorithm '" + algo + "' appears " +
                    std::to_string(hits) + " times for dataset '" + key.first +
                    "' seed " + std::to_string(key.second));
        }

        // ascending AUC, average ranks on ties
        std::vector<std::size_t> order(members.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return members[x]->auc < members[y]->auc;
        });
        std::vector<double> rank(members.size(), 0.0);
        std::size_t i = 0;
        while (i < members.size()) {
            std::size_t j = i;
            while (j + 1 < members.size() &&
                   members[order[j + 1]]->auc == members[order[i]]->auc)
                ++j;
            const double avg = static_cast<double>(i + 1 + j + 1) / 2.0;
            for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
            i = j + 1;
        }
        for (std::size_t t = 0; t < members.size(); ++t) {
            const AucRecord& r = *members[t];
            table.rows.push_back({r.algorithm, r.dataset, r.seed, r.auc, rank[t]});
            rank_sum[r.algorithm] += rank[t];
        }
    }
    for (const auto& [algo, sum] : rank_sum)
        table.mean_rank[algo] = sum / static_cast<double>(group_count);
    return table;
}

}  // namespace flowal
