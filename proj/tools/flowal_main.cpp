#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "flowal/harness.hpp"
#include "flowal/metrics.hpp"
#include "flowal/report.hpp"
#include "flowal/stats.hpp"

namespace fs = std::filesystem;
using namespace flowal;

namespace {

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
                   ? c
                   : '_';
    return out;
}

// "0,3,7-9" -> {0, 3, 7, 8, 9}
std::vector<std::uint64_t> parse_seed_spec(const std::string& spec) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            seeds.push_back(std::stoull(part));
        } else {
            const auto lo = std::stoull(part.substr(0, dash));
            const auto hi = std::stoull(part.substr(dash + 1));
            if (hi < lo) throw CLI::ValidationError("--seeds", "descending range " + part);
            for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
        }
    }
    if (seeds.empty()) throw CLI::ValidationError("--seeds", "no seeds in '" + spec + "'");
    return seeds;
}

std::vector<std::string> collect_configs(const std::string& path) {
    std::vector<std::string> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            const auto p = entry.path();
            if (entry.is_regular_file() && p.extension() == ".json")
                files.push_back(p.string());
        }
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw std::runtime_error("no .json configs under " + path);
    } else if (fs::is_regular_file(path)) {
        files.push_back(path);
    } else {
        throw std::runtime_error("config path does not exist: " + path);
    }
    return files;
}

struct Job {
    ExperimentConfig cfg;
    std::string csv_path;
};

int cmd_run(const std::string& config_path, const std::string& seed_spec,
            unsigned parallel, const std::string& out_dir, bool wall_times) {
    std::vector<Job> jobs;
    for (const auto& file : collect_configs(config_path)) {
        const ExperimentConfig base = load_experiment_config(file);
        std::vector<std::uint64_t> seeds =
            seed_spec.empty() ? std::vector<std::uint64_t>{base.seed}
                              : parse_seed_spec(seed_spec);
        for (std::uint64_t seed : seeds) {
            Job j;
            j.cfg = base;
            j.cfg.seed = seed;
            const std::string label = sanitize(
                base.dataset.name.empty() ? base.dataset.kind : base.dataset.name);
            j.csv_path = out_dir + "/" + label + "__" + base.acquisition + "__seed" +
                         std::to_string(seed) + ".csv";
            jobs.push_back(std::move(j));
        }
    }
    fs::create_directories(out_dir);
    std::printf("%zu experiment(s) -> %s\n", jobs.size(), out_dir.c_str());

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> failures{0};
    std::mutex log_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job& job = jobs[i];
            {
                // sidecar first so a crashed run still leaves a scannable pair
                std::ofstream meta(job.csv_path + ".meta.json", std::ios::binary);
                meta << experiment_config_json(job.cfg);
            }
            try {
                const auto t0 = std::chrono::steady_clock::now();
                Trajectory t = run_experiment(job.cfg, job.csv_path, wall_times);
                std::ofstream meta(job.csv_path + ".meta.json", std::ios::binary);
                meta << t.config_json;  // resolved (feature_dim filled in)
                const double secs =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
                std::lock_guard<std::mutex> lock(log_mutex);
                std::printf("[done] %-55s %6.1fs  final nll %.4f\n",
                            fs::path(job.csv_path).filename().string().c_str(), secs,
                            t.rows.back().nll);
                std::fflush(stdout);
            } catch (const std::exception& e) {
                failures.fetch_add(1);
                std::lock_guard<std::mutex> lock(log_mutex);
                std::fprintf(stderr, "[fail] %s: %s\n", job.csv_path.c_str(), e.what());
            }
        }
    };
    const unsigned n_workers =
        std::max(1u, std::min<unsigned>(parallel, static_cast<unsigned>(jobs.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w + 1 < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    if (failures > 0) {
        std::fprintf(stderr, "%zu of %zu experiment(s) failed\n", failures.load(),
                     jobs.size());
        return 1;
    }
    return 0;
}

int cmd_report(const std::string& results_dir, const std::string& out_dir,
               const std::string& metric, double alpha) {
    const auto runs = scan_results_dir(results_dir);
    emit_report(runs, out_dir, metric, alpha);
    std::printf("%zu run(s) aggregated -> %s\n", runs.size(), out_dir.c_str());
    return 0;
}

// ---- selftest -------------------------------------------------------------

struct SelfTest {
    int failed = 0;

    void check(const std::string& name, const std::function<void()>& body) {
        try {
            body();
            std::printf("[ok ] %s\n", name.c_str());
        } catch (const std::exception& e) {
            ++failed;
            std::printf("[FAIL] %s: %s\n", name.c_str(), e.what());
        }
        std::fflush(stdout);
    }
};

void expect(bool cond, const std::string& what) {
    if (!cond) throw std::runtime_error(what);
}

ModelConfig selftest_model(const std::string& family) {
    ModelConfig m;
    m.family = family;
    m.feature_dim = 3;
    m.encoder_widths = {8, 8};
    m.conditioner_widths = {8};
    m.flow_layers = 1;
    m.spline_bins = 4;
    m.dropout_train = 0.1;
    m.dropout_eval = 0.1;
    return m;
}

int cmd_selftest() {
    SelfTest st;

    st.check("rng: determinism and fork independence", [] {
        RngStream a(42), b(42);
        for (int i = 0; i < 100; ++i)
            expect(a.next_u64() == b.next_u64(), "same seed diverged");
        RngStream parent(7);
        const auto before = RngStream(7).next_u64();
        RngStream child = parent.fork(kTagSamples);
        expect(parent.next_u64() == before, "fork advanced the parent");
        expect(child.next_u64() != RngStream(7).next_u64(), "fork not independent");
    });

    st.check("metrics: emd laws on random samples", [] {
        RngStream rng(1);
        for (int t = 0; t < 200; ++t) {
            std::vector<double> a, b, c;
            for (int i = 0; i < 16; ++i) {
                a.push_back(rng.normal());
                b.push_back(rng.normal());
                c.push_back(rng.normal());
            }
            const double ab = emd_1d(a, b), ba = emd_1d(b, a);
            expect(std::fabs(ab - ba) < 1e-12, "emd asymmetric");
            expect(emd_1d(a, a) == 0.0, "emd(a,a) != 0");
            expect(ab >= 0.0, "emd negative");
            expect(ab <= emd_1d(a, c) + emd_1d(c, b) + 1e-12, "triangle violated");
        }
    });

    st.check("metrics: kl = cross-entropy minus entropy", [] {
        RngStream rng(2);
        for (int t = 0; t < 200; ++t) {
            std::vector<double> p(50), q(50);
            double sp = 0.0, sq = 0.0;
            for (int i = 0; i < 50; ++i) {
                p[i] = rng.uniform() + 1e-3;
                q[i] = rng.uniform() + 1e-3;
                sp += p[i];
                sq += q[i];
            }
            for (int i = 0; i < 50; ++i) {
                p[i] /= sp;
                q[i] /= sq;
            }
            const double lhs = discrete_kl(p, q);
            const double rhs = discrete_cross_entropy(p, q) - discrete_entropy(p);
            expect(std::fabs(lhs - rhs) < 1e-10, "identity off by " +
                                                     std::to_string(lhs - rhs));
            expect(lhs >= -1e-12, "kl negative on distributions");
        }
    });

    st.check("flow: samples agree with their own log densities", [] {
        auto m = make_model(selftest_model("flow"));
        RngStream init(3);
        m->init(init);
        auto pred = m->predictive({0.1, -0.2, 0.4}, nullptr);
        std::vector<double> ys, lps;
        pred->sample(256, RngStream(4), ys, &lps);
        for (std::size_t i = 0; i < ys.size(); ++i) {
            expect(std::isfinite(ys[i]) && std::isfinite(lps[i]), "non-finite draw");
            expect(std::fabs(pred->log_prob(ys[i]) - lps[i]) < 1e-9,
                   "log_prob disagrees with sampling path");
        }
    });

    st.check("scoring: zero dropout collapses epistemic scores to exactly 0", [] {
        for (const char* family : {"gaussian", "flow"}) {
            ModelConfig cfg = selftest_model(family);
            cfg.dropout_eval = 0.0;
            auto m = make_model(cfg);
            RngStream init(5);
            m->init(init);
            McConfig mc;
            mc.k = 6;
            mc.m = 32;
            const auto masks = draw_mask_set(cfg, mc.k, 0.0, RngStream(55));
            for (const char* name : {"bald_sigma", "bald_lc", "bald_entropy",
                                     "nflows_out", "balsa_kl_grid", "balsa_kl_pair",
                                     "balsa_emd"}) {
                const double s = score_candidate(*m, {0.3, 0.1, -0.2}, name, mc, masks,
                                                 RngStream(6));
                expect(s == 0.0, std::string(name) + " gave " + std::to_string(s) +
                                     " under zero dropout");
            }
        }
    });

    st.check("scoring: serial and parallel agree bitwise", [] {
        ModelConfig cfg = selftest_model("flow");
        auto m = make_model(cfg);
        RngStream init(7);
        m->init(init);
        RngStream data(8);
        Tensor X(40, 3);
        for (std::size_t i = 0; i < 40; ++i)
            for (std::size_t j = 0; j < 3; ++j) X.at(i, j) = data.normal();
        std::vector<std::size_t> rows(40);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        McConfig mc;
        mc.k = 4;
        mc.m = 16;
        const auto serial =
            score_pool(*m, X, rows, "balsa_kl_pair", mc, RngStream(9), ScoreExec::kSerial);
        const auto parallel =
            score_pool(*m, X, rows, "balsa_kl_pair", mc, RngStream(9), ScoreExec::kParallel);
        expect(serial == parallel, "execution mode changed scores");
    });

    st.check("selection: top-tau matches exhaustive sort", [] {
        RngStream rng(10);
        for (int t = 0; t < 100; ++t) {
            const std::size_t n = 1 + rng.uniform_below(40);
            std::vector<double> scores;
            for (std::size_t i = 0; i < n; ++i)
                scores.push_back(static_cast<double>(rng.uniform_below(6)));
            const std::size_t tau = 1 + rng.uniform_below(n);
            const auto got = select_top_tau(scores, tau);
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return scores[a] > scores[b];
            });
            std::vector<std::size_t> want(order.begin(), order.begin() + tau);
            std::sort(want.begin(), want.end());
            expect(got == want, "selection mismatch");
        }
    });

    st.check("harness: tiny experiment is deterministic and budget-exact", [] {
        ExperimentConfig cfg;
        cfg.dataset.kind = "synthetic";
        cfg.dataset.name = "heteroscedastic";
        cfg.dataset.n = 120;
        cfg.model = selftest_model("gaussian");
        cfg.model.feature_dim = 0;  // resolved from the dataset
        cfg.acquisition = "std";
        cfg.tau = 5;
        cfg.seed_set = 20;
        cfg.budget = 10;
        cfg.mc.k = 4;
        cfg.mc.m = 16;
        cfg.train.max_epochs = 30;
        cfg.train.patience = 10;
        cfg.seed = 11;
        const Trajectory a = run_experiment(cfg);
        const Trajectory b = run_experiment(cfg);
        expect(a.rows.size() == 3, "expected ceil(B/tau)+1 = 3 rows, got " +
                                       std::to_string(a.rows.size()));
        expect(a.rows.back().labeled_size == 30, "budget not fully spent");
        expect(a.config_json == b.config_json, "resolved config changed");
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            expect(a.rows[i].nll == b.rows[i].nll && a.rows[i].mae == b.rows[i].mae &&
                       a.rows[i].crps == b.rows[i].crps,
                   "rerun diverged at round " + std::to_string(i));
        }
    });

    st.check("stats: wilcoxon matches 2^n enumeration", [] {
        RngStream rng(12);
        for (int t = 0; t < 60; ++t) {
            const std::size_t n = 2 + rng.uniform_below(9);
            std::vector<double> d(n), zeros(n, 0.0);
            for (auto& v : d) v = static_cast<double>(rng.uniform_below(9)) - 4.0;
            if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; }))
                d[0] = 1.0;
            const auto res = wilcoxon_signed_rank(d, zeros);

            std::vector<double> abs_d;
            std::vector<bool> pos;
            for (double v : d)
                if (v != 0.0) {
                    abs_d.push_back(std::fabs(v));
                    pos.push_back(v > 0.0);
                }
            const std::size_t k = abs_d.size();
            std::vector<std::size_t> order(k);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(),
                      [&](std::size_t x, std::size_t y) { return abs_d[x] < abs_d[y]; });
            std::vector<double> rank(k);
            for (std::size_t i = 0; i < k;) {
                std::size_t j = i;
                while (j + 1 < k && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
                for (std::size_t u = i; u <= j; ++u)
                    rank[order[u]] = static_cast<double>(i + j + 2) / 2.0;
                i = j + 1;
            }
            double w_plus = 0.0, total = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                total += rank[i];
                if (pos[i]) w_plus += rank[i];
            }
            const double w_min = std::min(w_plus, total - w_plus);
            std::size_t fav = 0;
            for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
                double s = 0.0;
                for (std::size_t i = 0; i < k; ++i)
                    if (mask & (std::size_t{1} << i)) s += rank[i];
                if (std::min(s, total - s) <= w_min + 1e-9) ++fav;
            }
            const double oracle =
                static_cast<double>(fav) / static_cast<double>(std::size_t{1} << k);
            expect(std::fabs(res.p_value - oracle) < 1e-10,
                   "p " + std::to_string(res.p_value) + " vs oracle " +
                       std::to_string(oracle));
        }
    });

    st.check("stats: mean ranks average to (k+1)/2; holm is monotone", [] {
        RngStream rng(13);
        std::vector<AucRecord> recs;
        for (int seed = 0; seed < 5; ++seed)
            for (const char* a : {"w", "x", "y", "z"})
                recs.push_back({a, "d", static_cast<std::uint64_t>(seed), rng.normal()});
        const auto table = rank_algorithms(recs);
        double total = 0.0;
        for (const auto& [algo, mean] : table.mean_rank) total += mean;
        expect(std::fabs(total / 4.0 - 2.5) < 1e-12, "mean-rank identity violated");

        for (int t = 0; t < 100; ++t) {
            std::vector<double> p;
            const std::size_t m = 1 + rng.uniform_below(8);
            for (std::size_t i = 0; i < m; ++i) p.push_back(rng.uniform());
            const auto rej = holm_reject(p, 0.2);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    if (rej[j] && p[i] <= p[j])
                        expect(rej[i], "holm monotonicity violated");
        }
    });

    std::printf(st.failed == 0 ? "selftest: all checks passed\n"
                               : "selftest: %d check(s) FAILED\n",
                st.failed);
    return st.failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pool-based active learning for regression with distributional models"};
    app.require_subcommand(1);

    std::string config_path, seed_spec, run_out = "results";
    unsigned parallel = 1;
    bool wall_times = false;
    auto* run = app.add_subcommand("run", "Execute experiments from a config file or directory");
    run->add_option("--config", config_path, "Experiment config (.json) or directory of configs")
        ->required();
    run->add_option("--seeds", seed_spec, "Seed list, e.g. 0,1,4-7 (default: the config's seed)");
    run->add_option("--parallel", parallel, "Worker threads over experiments")
        ->check(CLI::PositiveNumber);
    run->add_option("--out", run_out, "Output directory for trajectories");
    run->add_flag("--wall-times", wall_times,
                  "Record real per-round seconds instead of the 0.000 placeholder");

    std::string results_dir, report_out = "report", metric = "nll";
    double alpha = 0.05;
    auto* report = app.add_subcommand("report", "Aggregate a results directory");
    report->add_option("results", results_dir, "Directory of trajectory CSVs")->required();
    report->add_option("--out", report_out, "Output directory for the report");
    report->add_option("--metric", metric, "Ranking metric")
        ->check(CLI::IsMember({"nll", "mae", "crps"}));
    report->add_option("--alpha", alpha, "Holm family-wise error level")
        ->check(CLI::Range(0.0, 1.0));

    auto* selftest = app.add_subcommand("selftest", "Run the property and oracle suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, seed_spec, parallel, run_out, wall_times);
        if (report->parsed()) return cmd_report(results_dir, report_out, metric, alpha);
        if (selftest->parsed()) return cmd_selftest();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
