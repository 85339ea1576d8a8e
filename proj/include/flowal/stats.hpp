#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace flowal {

struct WilcoxonResult {
    double statistic = 0.0;  // min(W+, W-) over nonzero differences
    double p_value = 1.0;    // two-sided
    std::size_t n_used = 0;  // pairs remaining after dropping zero differences
    bool all_zero = false;
};

// Paired two-sided signed-rank test. Zero differences are dropped; ties get
// average ranks. Exact distribution (dynamic program over rank sums) below 20
// usable pairs, normal approximation with tie and continuity corrections
// otherwise.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b);

// Holm step-down decisions at level alpha: sorted ascending, p_(i) is tested
// against alpha/(m-i+1); the first failure retains that and every larger p.
std::vector<bool> holm_reject(const std::vector<double>& p_values, double alpha);

// P(X >= k) for X ~ Binomial(n, 1/2); the one-sided sign test p-value.
double sign_test_p(std::size_t wins, std::size_t n);

struct AucRecord {
    std::string algorithm;
    std::string dataset;
    std::uint64_t seed = 0;
    double auc = 0.0;
};

struct RankRecord {
    std::string algorithm;
    std::string dataset;
    std::uint64_t seed = 0;
    double auc = 0.0;
    double rank = 0.0;  // 1 = lowest AUC in its (dataset, seed) group
};

struct RankTable {
    std::vector<RankRecord> rows;                // sorted by (dataset, seed, algorithm)
    std::map<std::string, double> mean_rank;     // per algorithm
};

// Ranks AUCs within every (dataset, seed) group, ascending (lower AUC is
// better), average ranks on ties. Every algorithm must appear exactly once
// per group; missing or duplicated cells are reported by name.
RankTable rank_algorithms(const std::vector<AucRecord>& records);

}  // namespace flowal
