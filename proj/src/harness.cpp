#include "flowal/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "flowal/metrics.hpp"
#include "flowal/nadam.hpp"

namespace flowal {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
}

DatasetConfig parse_dataset(const json& j) {
    reject_unknown_keys(j, {"kind", "name", "n", "noise", "path", "target", "split_seed",
                            "fractions"},
                        "dataset");
    DatasetConfig d;
    d.kind = j.value("kind", d.kind);
    if (d.kind != "synthetic" && d.kind != "csv")
        throw std::invalid_argument("config: dataset.kind must be synthetic or csv");
    d.name = j.value("name", d.name);
    d.n = j.value("n", d.n);
    d.noise = j.value("noise", d.noise);
    d.path = j.value("path", d.path);
    d.target = j.value("target", d.target);
    d.split_seed = j.value("split_seed", d.split_seed);
    if (j.contains("fractions")) {
        const auto f = j.at("fractions").get<std::vector<double>>();
        if (f.size() != 3)
            throw std::invalid_argument("config: dataset.fractions needs 3 entries");
        d.f_train = f[0];
        d.f_val = f[1];
        d.f_test = f[2];
    }
    if (d.kind == "synthetic") (void)synthetic_kind_from_string(d.name);
    if (d.kind == "csv" && d.path.empty())
        throw std::invalid_argument("config: csv dataset needs a path");
    return d;
}

ModelConfig parse_model(const json& j) {
    // feature_dim is resolved from the dataset but accepted on input so the
    // emitted canonical config re-parses
    reject_unknown_keys(j, {"family", "feature_dim", "encoder", "conditioner",
                            "flow_layers", "spline_bins", "tail_bound", "dropout_train",
                            "dropout_eval", "sigma_floor"},
                        "model");
    ModelConfig m;
    m.family = j.value("family", m.family);
    m.feature_dim = j.value("feature_dim", m.feature_dim);
    if (j.contains("encoder"))
        m.encoder_widths = j.at("encoder").get<std::vector<std::size_t>>();
    if (j.contains("conditioner"))
        m.conditioner_widths = j.at("conditioner").get<std::vector<std::size_t>>();
    m.flow_layers = j.value("flow_layers", m.flow_layers);
    m.spline_bins = j.value("spline_bins", m.spline_bins);
    m.tail_bound = j.value("tail_bound", m.tail_bound);
    m.dropout_train = j.value("dropout_train", m.dropout_train);
    m.dropout_eval = j.value("dropout_eval", m.dropout_eval);
    m.sigma_floor = j.value("sigma_floor", m.sigma_floor);
    return m;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    reject_unknown_keys(j, {"dataset", "model", "acquisition", "al", "train", "seed"},
                        "the top level");
    ExperimentConfig cfg;
    if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"));
    if (j.contains("model")) cfg.model = parse_model(j.at("model"));
    if (j.contains("acquisition")) {
        const json& a = j.at("acquisition");
        reject_unknown_keys(a, {"name", "tau", "k", "m", "grid_resolution", "dropout_eval",
                                "signed_bald_diffs"},
                            "acquisition");
        cfg.acquisition = a.value("name", cfg.acquisition);
        cfg.tau = a.value("tau", cfg.tau);
        cfg.mc.k = a.value("k", cfg.mc.k);
        cfg.mc.m = a.value("m", cfg.mc.m);
        cfg.mc.grid_resolution = a.value("grid_resolution", cfg.mc.grid_resolution);
        cfg.mc.dropout_eval = a.value("dropout_eval", cfg.mc.dropout_eval);
        cfg.mc.signed_bald_diffs = a.value("signed_bald_diffs", cfg.mc.signed_bald_diffs);
    }
    if (std::find(kAcquisitionNames.begin(), kAcquisitionNames.end(), cfg.acquisition) ==
        kAcquisitionNames.end())
        throw std::invalid_argument("config: unknown acquisition '" + cfg.acquisition + "'");
    if (j.contains("al")) {
        const json& a = j.at("al");
        reject_unknown_keys(a, {"seed_set", "budget"}, "al");
        cfg.seed_set = a.value("seed_set", cfg.seed_set);
        cfg.budget = a.value("budget", cfg.budget);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown_keys(t, {"batch_size", "max_epochs", "patience", "lr",
                                "weight_decay"},
                            "train");
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
        cfg.train.patience = t.value("patience", cfg.train.patience);
        cfg.train.lr = t.value("lr", cfg.train.lr);
        cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (cfg.tau < 1) throw std::invalid_argument("config: tau must be >= 1");
    if (cfg.train.batch_size < 1 || cfg.train.max_epochs < 1)
        throw std::invalid_argument("config: batch_size and max_epochs must be >= 1");
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_experiment_config(buf.str());
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
    json j;
    j["dataset"] = {{"kind", cfg.dataset.kind},       {"name", cfg.dataset.name},
                    {"n", cfg.dataset.n},             {"noise", cfg.dataset.noise},
                    {"path", cfg.dataset.path},       {"target", cfg.dataset.target},
                    {"split_seed", cfg.dataset.split_seed},
                    {"fractions", {cfg.dataset.f_train, cfg.dataset.f_val, cfg.dataset.f_test}}};
    j["model"] = {{"family", cfg.model.family},
                  {"feature_dim", cfg.model.feature_dim},
                  {"encoder", cfg.model.encoder_widths},
                  {"conditioner", cfg.model.conditioner_widths},
                  {"flow_layers", cfg.model.flow_layers},
                  {"spline_bins", cfg.model.spline_bins},
                  {"tail_bound", cfg.model.tail_bound},
                  {"dropout_train", cfg.model.dropout_train},
                  {"dropout_eval", cfg.model.dropout_eval},
                  {"sigma_floor", cfg.model.sigma_floor}};
    j["acquisition"] = {{"name", cfg.acquisition},
                        {"tau", cfg.tau},
                        {"k", cfg.mc.k},
                        {"m", cfg.mc.m},
                        {"grid_resolution", cfg.mc.grid_resolution},
                        {"dropout_eval", cfg.mc.dropout_eval},
                        {"signed_bald_diffs", cfg.mc.signed_bald_diffs}};
    j["al"] = {{"seed_set", cfg.seed_set}, {"budget", cfg.budget}};
    j["train"] = {{"batch_size", cfg.train.batch_size},
                  {"max_epochs", cfg.train.max_epochs},
                  {"patience", cfg.train.patience},
                  {"lr", cfg.train.lr},
                  {"weight_decay", cfg.train.weight_decay}};
    j["seed"] = cfg.seed;
    return j.dump(2);
}

PoolState init_pools(std::size_t n_train, std::size_t seed_set_size, RngStream& rng) {
    if (seed_set_size > n_train)
        throw std::invalid_argument("init_pools: seed set exceeds the train split");
    PoolState s;
    s.labeled = random_select(n_train, seed_set_size, rng);
    std::sort(s.labeled.begin(), s.labeled.end());
    std::vector<bool> taken(n_train, false);
    for (std::size_t i : s.labeled) taken[i] = true;
    for (std::size_t i = 0; i < n_train; ++i)
        if (!taken[i]) s.unlabeled.push_back(i);
    return s;
}

void check_pool_invariant(const PoolState& s, std::size_t n_train) {
    if (s.labeled.size() + s.unlabeled.size() != n_train)
        throw std::runtime_error("pool invariant violated: sizes do not cover the train set");
    std::vector<bool> seen(n_train, false);
    for (std::size_t i : s.labeled) {
        if (i >= n_train || seen[i])
            throw std::runtime_error("pool invariant violated: duplicate or bad index");
        seen[i] = true;
    }
    for (std::size_t i : s.unlabeled) {
        if (i >= n_train || seen[i])
            throw std::runtime_error("pool invariant violated: labeled/unlabeled overlap");
        seen[i] = true;
    }
}

namespace {

Tensor gather_rows(const Tensor& X, const std::vector<std::size_t>& rows) {
    Tensor out(rows.size(), X.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < X.cols(); ++c) out.at(r, c) = X.at(rows[r], c);
    return out;
}

}  // namespace

std::unique_ptr<Model> train_model(const ModelConfig& mcfg, const TrainConfig& tcfg,
                                   const Tensor& X_train, const Tensor& Y_train,
                                   const Tensor& X_val, const Tensor& Y_val,
                                   RngStream rng, TrainStats* stats) {
    const std::size_t n = X_train.rows();
    if (n == 0) throw std::invalid_argument("train_model: empty labeled set");
    if (X_train.cols() != mcfg.feature_dim)
        throw std::invalid_argument("train_model: feature_dim mismatch");
    const bool has_val = X_val.rows() > 0;

    for (int attempt = 0; attempt < 2; ++attempt) {
        const double lr = attempt == 0 ? tcfg.lr : tcfg.lr / 10.0;
        auto model = make_model(mcfg);
        RngStream init = rng.fork(kTagInit, static_cast<std::uint64_t>(attempt));
        model->init(init);
        NAdam opt({.lr = lr, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8,
                   .weight_decay = tcfg.weight_decay});
        for (auto& [name, p] : model->named_params()) opt.attach(*p, name);

        auto best = snapshot_params(*model);
        double best_val = std::numeric_limits<double>::infinity();
        std::size_t since_best = 0;
        bool diverged = false;
        std::size_t epochs_run = 0;

        std::vector<std::size_t> perm(n);
        for (std::size_t epoch = 0; epoch < tcfg.max_epochs && !diverged; ++epoch) {
            ++epochs_run;
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            RngStream shuffle =
                rng.fork(kTagShuffle, epoch, static_cast<std::uint64_t>(attempt));
            for (std::size_t i = n; i > 1; --i)
                std::swap(perm[i - 1], perm[shuffle.uniform_below(i)]);
            RngStream drop =
                rng.fork(kTagDropout, epoch, static_cast<std::uint64_t>(attempt));

            for (std::size_t start = 0; start < n && !diverged;
                 start += tcfg.batch_size) {
                const std::size_t len = std::min(tcfg.batch_size, n - start);
                std::vector<std::size_t> batch(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                               perm.begin() + static_cast<std::ptrdiff_t>(start + len));
                const Tensor Xb = gather_rows(X_train, batch);
                const Tensor Yb = gather_rows(Y_train, batch);
                Tape tape;
                const VarId loss = model->nll(tape, Xb, Yb, DropoutMode::kTrain, drop);
                if (!std::isfinite(tape.scalar(loss))) {
                    diverged = true;
                    break;
                }
                opt.zero_grad();
                tape.backward(loss);
                try {
                    opt.step();
                } catch (const std::runtime_error&) {
                    diverged = true;
                }
            }
            if (diverged) break;

            if (has_val) {
                const double v = model->nll_value(X_val, Y_val);
                if (!std::isfinite(v)) {
                    diverged = true;
                    break;
                }
                if (v < best_val) {
                    best_val = v;
                    best = snapshot_params(*model);
                    since_best = 0;
                } else if (++since_best >= tcfg.patience) {
                    break;
                }
            }
        }

        if (!diverged) {
            if (has_val) restore_params(*model, best);
            if (stats) {
                stats->epochs = epochs_run;
                stats->best_val_nll = has_val ? best_val : model->nll_value(X_train, Y_train);
                stats->retried = attempt > 0;
            }
            return model;
        }
    }
    throw std::runtime_error("train_model: training diverged at lr " +
                             std::to_string(tcfg.lr) + " and again at lr/10");
}

EvalMetrics evaluate(const Model& model, const Tensor& X, const Tensor& Y, std::size_t m,
                     const RngStream& rng) {
    const std::size_t n = X.rows();
    if (n == 0) throw std::invalid_argument("evaluate: empty evaluation set");
    EvalMetrics out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(X.cols());
        for (std::size_t j = 0; j < X.cols(); ++j) x[j] = X.at(i, j);
        const double y = Y.at(i, 0);
        const auto d = model.predictive(x, nullptr);

        const double nll_i = -d->log_prob(y);
        double mu, sigma, mae_i, crps_i;
        if (d->location_scale(mu, sigma)) {
            mae_i = std::fabs(mu - y);
            crps_i = crps_gaussian(y, mu, sigma);
        } else {
            std::vector<double> ys;
            d->sample(m, rng.fork(kTagSamples, i), ys);
            mae_i = std::fabs(sample_mean(ys) - y);
            crps_i = crps_samples(y, ys);
        }
        if (!std::isfinite(nll_i) || !std::isfinite(mae_i) || !std::isfinite(crps_i))
            throw std::runtime_error("evaluate: non-finite metric at row " +
                                     std::to_string(i));
        out.nll += nll_i;
        out.mae += mae_i;
        out.crps += crps_i;
    }
    out.nll /= static_cast<double>(n);
    out.mae /= static_cast<double>(n);
    out.crps /= static_cast<double>(n);
    return out;
}

namespace {

std::string format_row(const TrajectoryRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.10g,%.10g,%.10g,%.3f", r.round,
                  r.labeled_size, r.nll, r.mae, r.crps, r.seconds);
    return buf;
}

constexpr const char* kCsvHeader = "round,labeled_size,nll,mae,crps,seconds";

}  // namespace

Trajectory run_experiment(const ExperimentConfig& cfg, const std::string& csv_path,
                          bool wall_times) {
    RngStream root(cfg.seed);

    Dataset data;
    if (cfg.dataset.kind == "synthetic") {
        RngStream gen = root.fork(kTagDataGen);
        data = make_synthetic(synthetic_kind_from_string(cfg.dataset.name), cfg.dataset.n,
                              cfg.dataset.noise, gen);
    } else {
        data = load_csv(cfg.dataset.path, cfg.dataset.target);
        if (!cfg.dataset.name.empty()) data.name = cfg.dataset.name;
    }

    const SplitIndices split = split_dataset(data.rows(), cfg.dataset.f_train,
                                             cfg.dataset.f_val, cfg.dataset.f_test,
                                             cfg.dataset.split_seed);
    if (split.val.empty() || split.test.empty())
        throw std::invalid_argument("run_experiment: empty validation or test split");
    const Normalization norm = fit_normalization(data, split.train);

    Tensor X_train, Y_train, X_val, Y_val, X_test, Y_test;
    gather_normalized(data, norm, split.train, false, X_train, Y_train);
    gather_normalized(data, norm, split.val, true, X_val, Y_val);
    gather_normalized(data, norm, split.test, true, X_test, Y_test);

    if (cfg.seed_set + cfg.budget > split.train.size())
        throw std::invalid_argument(
            "run_experiment: seed_set + budget exceeds the train split (" +
            std::to_string(split.train.size()) + " rows)");

    ExperimentConfig resolved = cfg;
    resolved.model.feature_dim = data.features();

    Trajectory out;
    out.config_json = experiment_config_json(resolved);

    std::ofstream csv;
    if (!csv_path.empty()) {
        csv.open(csv_path, std::ios::binary);  // binary: byte-stable line endings
        if (!csv) throw std::runtime_error("run_experiment: cannot write " + csv_path);
        csv << kCsvHeader << "\n" << std::flush;
    }

    RngStream seed_rng = root.fork(kTagSeedSet);
    PoolState pools = init_pools(X_train.rows(), cfg.seed_set, seed_rng);
    check_pool_invariant(pools, X_train.rows());

    std::size_t budget_left = cfg.budget;
    while (true) {
        const auto t0 = std::chrono::steady_clock::now();
        const RngStream round_rng = root.fork(kTagRound, pools.round);

        const Tensor XL = gather_rows(X_train, pools.labeled);
        const Tensor YL = gather_rows(Y_train, pools.labeled);
        const auto model =
            train_model(resolved.model, cfg.train, XL, YL, X_val, Y_val, round_rng);
        const EvalMetrics m = evaluate(*model, X_test, Y_test, cfg.mc.m,
                                       round_rng.fork(kTagEval));

        const bool last = budget_left == 0 || pools.unlabeled.empty();
        std::vector<std::size_t> positions;
        if (!last) {
            const std::size_t tau_now =
                std::min({cfg.tau, budget_left, pools.unlabeled.size()});
            if (cfg.acquisition == "random") {
                RngStream acq = round_rng.fork(kTagAcquire);
                positions = random_select(pools.unlabeled.size(), tau_now, acq);
            } else if (cfg.acquisition == "coreset" || cfg.acquisition == "typiclust") {
                std::vector<std::vector<double>> lab, unl;
                lab.reserve(pools.labeled.size());
                unl.reserve(pools.unlabeled.size());
                std::vector<double> x(X_train.cols());
                for (std::size_t r : pools.labeled) {
                    for (std::size_t c = 0; c < X_train.cols(); ++c) x[c] = X_train.at(r, c);
                    lab.push_back(model->latent_eval(x));
                }
                for (std::size_t r : pools.unlabeled) {
                    for (std::size_t c = 0; c < X_train.cols(); ++c) x[c] = X_train.at(r, c);
                    unl.push_back(model->latent_eval(x));
                }
                positions = cfg.acquisition == "coreset"
                                ? coreset_select(lab, unl, tau_now)
                                : typiclust_select(lab, unl, tau_now,
                                                   round_rng.fork(kTagAcquire));
            } else {
                const auto scores = score_pool(*model, X_train, pools.unlabeled,
                                               cfg.acquisition, cfg.mc, round_rng);
                positions = select_top_tau(scores, tau_now);
            }
        }

        TrajectoryRow row;
        row.round = pools.round;
        row.labeled_size = pools.labeled.size();
        row.nll = m.nll;
        row.mae = m.mae;
        row.crps = m.crps;
        row.seconds =
            wall_times
                ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count()
                : 0.0;
        out.rows.push_back(row);
        if (csv.is_open()) csv << format_row(row) << "\n" << std::flush;

        if (last) break;

        std::vector<std::size_t> acquired;
        acquired.reserve(positions.size());
        for (std::size_t p : positions) acquired.push_back(pools.unlabeled[p]);
        std::sort(acquired.begin(), acquired.end());
        pools.history.push_back(acquired);

        std::vector<std::size_t> rest;
        rest.reserve(pools.unlabeled.size() - acquired.size());
        std::set_difference(pools.unlabeled.begin(), pools.unlabeled.end(),
                            acquired.begin(), acquired.end(), std::back_inserter(rest));
        pools.unlabeled = std::move(rest);
        std::vector<std::size_t> merged;
        merged.reserve(pools.labeled.size() + acquired.size());
        std::merge(pools.labeled.begin(), pools.labeled.end(), acquired.begin(),
                   acquired.end(), std::back_inserter(merged));
        pools.labeled = std::move(merged);

        budget_left -= acquired.size();
        ++pools.round;
        check_pool_invariant(pools, X_train.rows());
    }
    return out;
}

void write_trajectory_csv(const Trajectory& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_trajectory_csv: cannot write " + path);
    f << kCsvHeader << "\n";
    for (const auto& r : t.rows) f << format_row(r) << "\n";
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_trajectory_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != kCsvHeader)
        throw std::runtime_error("read_trajectory_csv: bad header in " + path);
    Trajectory t;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        TrajectoryRow r;
        if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf,%lf,%lf", &r.round,
                        &r.labeled_size, &r.nll, &r.mae, &r.crps, &r.seconds) != 6)
            throw std::runtime_error("read_trajectory_csv: bad row '" + line + "'");
        t.rows.push_back(r);
    }
    return t;
}

double auc(const Trajectory& t, const std::string& metric) {
    if (t.rows.size() < 2) throw std::invalid_argument("auc: needs at least 2 rows");
    auto pick = [&](const TrajectoryRow& r) {
        if (metric == "nll") return r.nll;
        if (metric == "mae") return r.mae;
        if (metric == "crps") return r.crps;
        throw std::invalid_argument("auc: unknown metric '" + metric + "'");
    };
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < t.rows.size(); ++i) {
        const double dx = static_cast<double>(t.rows[i + 1].labeled_size) -
                          static_cast<double>(t.rows[i].labeled_size);
        area += 0.5 * (pick(t.rows[i]) + pick(t.rows[i + 1])) * dx;
    }
    const double span = static_cast<double>(t.rows.back().labeled_size) -
                        static_cast<double>(t.rows.front().labeled_size);
    if (span <= 0.0) throw std::invalid_argument("auc: labeled-size span is zero");
    return area / span;
}

}  // namespace flowal
