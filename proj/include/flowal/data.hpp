#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "flowal/rng.hpp"
#include "flowal/tensor.hpp"

namespace flowal {

// A dataset after ingestion: dense numeric features, scalar targets, no NaN.
struct Dataset {
    std::string name;
    Tensor X;                  // rows × features
    std::vector<double> y;     // rows
    std::vector<std::string> feature_names;
    std::size_t dropped_rows = 0;  // rows removed for missing/non-finite fields

    std::size_t rows() const { return X.rows(); }
    std::size_t features() const { return X.cols(); }
};

// Parses an RFC-4180 style CSV (header row, quoted fields, CRLF tolerated).
// Non-numeric columns are one-hot encoded with categories in alphabetical
// order. Rows with missing or non-finite values are dropped and counted.
// An empty target name selects the last column.
Dataset load_csv(const std::string& path, const std::string& target_column = "");

enum class SyntheticKind { kHeteroscedastic, kBimodal, kLinear };

SyntheticKind synthetic_kind_from_string(const std::string& s);

// One-feature generators used by property tests and desk-scale runs.
//   heteroscedastic: y = sin(4πx) + ε,  ε ~ N(0, 0.01 + 0.29·x)
//   bimodal:         y = 0.5 ± 0.4·x + N(0, 0.05), branch fair-coin
//   linear:          y = 0.2 + 0.6·x + N(0, 0.02)
// `noise` scales each generator's noise profile (0 = deterministic curve).
Dataset make_synthetic(SyntheticKind kind, std::size_t n, double noise, RngStream& rng);

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

// Disjoint, exhaustive shuffle-split. Sizes are floor(f·n) for train and val,
// remainder test; fractions must sum to 1.
SplitIndices split_dataset(std::size_t n, double f_train, double f_val, double f_test,
                           std::uint64_t split_seed);

// Train-split statistics: z-score for features, min-max to [0,1] for targets.
struct Normalization {
    std::vector<double> mean, std;
    double y_lo = 0.0, y_hi = 1.0;

    void apply_features(std::vector<double>& row) const;
    double normalize_target(double y) const;    // no clipping
    double denormalize_target(double z) const;
};

Normalization fit_normalization(const Dataset& d, const std::vector<std::size_t>& train_idx);

// Row-major feature matrix + targets for an index subset, transformed by the
// train statistics. Targets are clipped to [0,1] when `clip_targets` is set
// (used for val/test so grid scoring stays in range).
void gather_normalized(const Dataset& d, const Normalization& norm,
                       const std::vector<std::size_t>& idx, bool clip_targets,
                       Tensor& X_out, Tensor& Y_out);

// FNV-1a over the numeric content; equal bytes in → equal fingerprint out.
std::uint64_t dataset_fingerprint(const Dataset& d);

struct ManifestEntry {
    std::string path;
    std::string target;
};

// JSON file mapping dataset name → {path, target}.
std::map<std::string, ManifestEntry> load_manifest(const std::string& path);

}  // namespace flowal
