#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "flowal/acquisition.hpp"
#include "flowal/data.hpp"
#include "flowal/models.hpp"
#include "flowal/rng.hpp"

namespace flowal {

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t max_epochs = 500;
    std::size_t patience = 20;
    double lr = 1e-3;
    double weight_decay = 0.0;
};

struct DatasetConfig {
    std::string kind = "synthetic";  // "synthetic" | "csv"
    std::string name;                // synthetic kind, or a label for csv
    std::size_t n = 1000;            // synthetic row count (before splitting)
    double noise = 1.0;
    std::string path;                // csv
    std::string target;              // csv target column ("" = last)
    std::uint64_t split_seed = 1234;
    double f_train = 0.7, f_val = 0.15, f_test = 0.15;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    ModelConfig model;        // feature_dim resolved from the dataset at run time
    std::string acquisition = "random";
    std::size_t tau = 1;
    std::size_t seed_set = 200;
    std::size_t budget = 200;
    McConfig mc;
    TrainConfig train;
    std::uint64_t seed = 0;
};

// Strict parse: unknown keys anywhere are an error, so typos cannot silently
// fall back to defaults.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_json(const ExperimentConfig& cfg);  // canonical, resolved

struct PoolState {
    std::vector<std::size_t> labeled;    // sorted rows of the train tensor
    std::vector<std::size_t> unlabeled;  // sorted, disjoint from labeled
    std::size_t round = 0;
    std::vector<std::vector<std::size_t>> history;  // acquired rows per round
};

PoolState init_pools(std::size_t n_train, std::size_t seed_set_size, RngStream& rng);

// Throws when labeled/unlabeled overlap or fail to cover [0, n_train).
void check_pool_invariant(const PoolState& s, std::size_t n_train);

struct TrainStats {
    std::size_t epochs = 0;
    double best_val_nll = 0.0;
    bool retried = false;
};

// Fresh-initialization NAdam training with early stopping on validation NLL
// (best weights restored). Non-finite loss triggers one retry at lr/10.
// An empty validation set disables early stopping (runs max_epochs).
std::unique_ptr<Model> train_model(const ModelConfig& mcfg, const TrainConfig& tcfg,
                                   const Tensor& X_train, const Tensor& Y_train,
                                   const Tensor& X_val, const Tensor& Y_val,
                                   RngStream rng, TrainStats* stats = nullptr);

struct EvalMetrics {
    double nll = 0.0, mae = 0.0, crps = 0.0;
};

// Test metrics on the normalized target scale. Gaussian heads use mu and the
// closed-form CRPS; flows use the mean of m samples and the sample CRPS.
EvalMetrics evaluate(const Model& model, const Tensor& X, const Tensor& Y,
                     std::size_t m, const RngStream& rng);

struct TrajectoryRow {
    std::size_t round = 0;
    std::size_t labeled_size = 0;
    double nll = 0.0, mae = 0.0, crps = 0.0;
    double seconds = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    std::string config_json;  // resolved config the run actually used
};

// Full protocol: seed set -> [train -> evaluate -> acquire] until the budget
// is spent -> final train+evaluate. When `csv_path` is nonempty the file is
// written incrementally (header first, one row per round, flushed), so a
// failed run leaves a usable partial trajectory. `wall_times` writes real
// per-round seconds into the CSV instead of the deterministic 0.000
// placeholder (which keeps rerun outputs byte-identical).
Trajectory run_experiment(const ExperimentConfig& cfg, const std::string& csv_path = "",
                          bool wall_times = false);

void write_trajectory_csv(const Trajectory& t, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path);

// Trapezoidal area under metric-vs-labeled-size, divided by the labeled-size
// span. `metric` is one of "nll", "mae", "crps".
double auc(const Trajectory& t, const std::string& metric);

}  // namespace flowal
