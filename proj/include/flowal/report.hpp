#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowal/harness.hpp"
#include "flowal/stats.hpp"

namespace flowal {

struct RunRecord {
    std::string algorithm;
    std::string dataset;
    std::uint64_t seed = 0;
    Trajectory trajectory;
};

// Loads every `*.csv` under `dir` (sorted by name) together with its
// `<name>.csv.meta.json` sidecar, which identifies dataset, acquisition and
// seed.
std::vector<RunRecord> scan_results_dir(const std::string& dir);

// Writes ranks.csv, pairwise.csv (Wilcoxon p per algorithm pair + Holm
// decision), summary.md (mean ranks, best first) and one SVG per dataset with
// nll/mae/crps panels (mean curve per algorithm with a ±1 std band over
// seeds). Output is byte-deterministic for identical inputs. Ranking uses
// `metric`; the plots always show all three.
void emit_report(const std::vector<RunRecord>& runs, const std::string& out_dir,
                 const std::string& metric = "nll", double alpha = 0.05);

}  // namespace flowal
