#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flowal/report.hpp"

using namespace flowal;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t count = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

// Small but realistic trajectory: four rounds, metrics drifting down with a
// seed- and algorithm-dependent wiggle so ranks are not degenerate.
RunRecord make_run(const std::string& algo, const std::string& dataset,
                   std::uint64_t seed, double level) {
    RunRecord r;
    r.algorithm = algo;
    r.dataset = dataset;
    r.seed = seed;
    for (std::size_t i = 0; i < 4; ++i) {
        TrajectoryRow row;
        row.round = i;
        row.labeled_size = 50 + 10 * i;
        const double wiggle = 0.01 * static_cast<double>((seed * 7 + i * 3) % 5);
        row.nll = level - 0.1 * static_cast<double>(i) + wiggle;
        row.mae = 0.5 * level - 0.02 * static_cast<double>(i) + wiggle;
        row.crps = 0.4 * level - 0.03 * static_cast<double>(i) + wiggle;
        r.trajectory.rows.push_back(row);
    }
    return r;
}

std::vector<RunRecord> two_algo_fixture() {
    std::vector<RunRecord> runs;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        runs.push_back(make_run("entropy", "hetero", seed, 1.0));  // uniformly better
        runs.push_back(make_run("random", "hetero", seed, 2.0));
    }
    return runs;
}

}  // namespace

TEST_CASE("emit_report writes all four artifacts") {
    TempDir out("flowal_report_artifacts");
    emit_report(two_algo_fixture(), out.str());

    const std::string ranks = slurp(out.str() + "/ranks.csv");
    CHECK(ranks.rfind("algorithm,dataset,seed,auc,rank\n", 0) == 0);
    // 2 algorithms x 3 seeds = 6 data rows
    CHECK(count_occurrences(ranks, "\n") == 7);
    CHECK(count_occurrences(ranks, "entropy,hetero") == 3);

    const std::string pairwise = slurp(out.str() + "/pairwise.csv");
    CHECK(pairwise.rfind("algorithm_a,algorithm_b,p_value,holm_reject\n", 0) == 0);
    // ranks are (1, 2) in all 3 groups: W- = 0 with tied |d|, exact p = 2/8
    CHECK(pairwise.find("entropy,random,0.25,0") != std::string::npos);

    const std::string summary = slurp(out.str() + "/summary.md");
    const auto best = summary.find("| entropy |");
    const auto worst = summary.find("| random |");
    REQUIRE(best != std::string::npos);
    REQUIRE(worst != std::string::npos);
    CHECK(best < worst);  // mean rank 1 listed first
    CHECK(summary.find("1.0000") != std::string::npos);
    CHECK(summary.find("2.0000") != std::string::npos);

    CHECK(fs::exists(out.str() + "/plot_hetero.svg"));
}

TEST_CASE("svg carries one curve and one band per algorithm per panel") {
    TempDir out("flowal_report_svg");
    emit_report(two_algo_fixture(), out.str());
    const std::string svg = slurp(out.str() + "/plot_hetero.svg");
    CHECK(count_occurrences(svg, "<path ") == 6);     // 2 algorithms x 3 panels
    CHECK(count_occurrences(svg, "<polygon ") == 6);  // matching std bands
    CHECK(svg.find(">nll<") != std::string::npos);
    CHECK(svg.find(">mae<") != std::string::npos);
    CHECK(svg.find(">crps<") != std::string::npos);
    CHECK(svg.find("entropy (3 seeds)") != std::string::npos);
}

TEST_CASE("report output is byte-identical across calls") {
    TempDir a("flowal_report_rerun_a");
    TempDir b("flowal_report_rerun_b");
    const auto runs = two_algo_fixture();
    emit_report(runs, a.str());
    emit_report(runs, b.str());
    for (const char* name :
         {"/ranks.csv", "/pairwise.csv", "/summary.md", "/plot_hetero.svg"})
        CHECK(slurp(a.str() + name) == slurp(b.str() + name));
}

TEST_CASE("multiple datasets get one plot each and pooled ranks") {
    TempDir out("flowal_report_multi");
    std::vector<RunRecord> runs;
    for (std::uint64_t seed = 0; seed < 2; ++seed)
        for (const char* ds : {"hetero", "wave mix"}) {
            runs.push_back(make_run("entropy", ds, seed, 1.0));
            runs.push_back(make_run("random", ds, seed, 2.0));
        }
    emit_report(runs, out.str());
    CHECK(fs::exists(out.str() + "/plot_hetero.svg"));
    CHECK(fs::exists(out.str() + "/plot_wave_mix.svg"));  // space sanitized
    const std::string ranks = slurp(out.str() + "/ranks.csv");
    CHECK(count_occurrences(ranks, "\n") == 9);  // header + 2 algos x 2 ds x 2 seeds
}

TEST_CASE("scan_results_dir pairs csvs with their sidecars") {
    TempDir dir("flowal_report_scan");

    ExperimentConfig cfg;
    cfg.dataset.kind = "synthetic";
    cfg.dataset.name = "hetero";
    for (const char* algo : {"random", "entropy"})
        for (std::uint64_t seed = 0; seed < 2; ++seed) {
            cfg.acquisition = algo;
            cfg.seed = seed;
            Trajectory t;
            t.rows.push_back({0, 50, 1.5, 0.4, 0.3, 0.0});
            t.rows.push_back({1, 60, 1.2, 0.35, 0.28, 0.0});
            const std::string base = dir.str() + "/hetero__" + algo + "__seed" +
                                     std::to_string(seed) + ".csv";
            write_trajectory_csv(t, base);
            std::ofstream meta(base + ".meta.json", std::ios::binary);
            meta << experiment_config_json(cfg);
        }

    const auto runs = scan_results_dir(dir.str());
    REQUIRE(runs.size() == 4);
    // sorted by file name: entropy seeds before random seeds
    CHECK(runs[0].algorithm == "entropy");
    CHECK(runs[0].seed == 0);
    CHECK(runs[1].algorithm == "entropy");
    CHECK(runs[1].seed == 1);
    CHECK(runs[2].algorithm == "random");
    CHECK(runs[3].seed == 1);
    for (const auto& r : runs) {
        CHECK(r.dataset == "hetero");
        REQUIRE(r.trajectory.rows.size() == 2);
        CHECK(r.trajectory.rows[1].labeled_size == 60);
        CHECK(r.trajectory.rows[0].nll == doctest::Approx(1.5));
    }

    // end to end: scanned runs feed the report
    TempDir out("flowal_report_scan_out");
    emit_report(runs, out.str());
    CHECK(fs::exists(out.str() + "/summary.md"));
}

TEST_CASE("scan_results_dir error paths") {
    TempDir dir("flowal_report_scan_err");
    CHECK_THROWS_AS(scan_results_dir(dir.str()), std::runtime_error);  // empty
    {
        std::ofstream f(dir.str() + "/orphan.csv", std::ios::binary);
        f << "round,labeled_size,nll,mae,crps,seconds\n";
    }
    CHECK_THROWS_WITH_AS(scan_results_dir(dir.str()), doctest::Contains("meta.json"),
                         std::runtime_error);
    CHECK_THROWS_AS(scan_results_dir(dir.str() + "/nope"), std::runtime_error);
}

TEST_CASE("emit_report rejects empty input") {
    CHECK_THROWS_AS(emit_report({}, "/tmp/unused"), std::invalid_argument);
}
