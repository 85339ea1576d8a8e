#pragma once

#include <string>
#include <vector>

#include "flowal/models.hpp"
#include "flowal/rng.hpp"
#include "flowal/tensor.hpp"

namespace flowal {

// Monte Carlo settings shared by all disagreement scorers.
struct McConfig {
    std::size_t k = 10;               // dropout realizations per candidate
    std::size_t m = 200;              // iid draws per distribution
    std::size_t grid_resolution = 200;
    double dropout_eval = -1.0;       // <0: use the model's configured rate
    // Summed signed consecutive differences telescope to a_1 - a_k, which is
    // order noise rather than disagreement; absolute differences are the
    // default, the signed form stays available for comparison.
    bool signed_bald_diffs = false;
};

extern const std::vector<std::string> kAcquisitionNames;

bool acquisition_needs_mc(const std::string& name);
bool acquisition_is_geometric(const std::string& name);

// ---- Aggregates over per-realization artifacts (pure, test-friendly) ----

// Elementwise mean of equal-length vectors. Extended-precision accumulation:
// the mean of k identical vectors is bitwise the input, so zero-epistemic
// collapse tests can demand exact zeros.
std::vector<double> mean_grid(const std::vector<std::vector<double>>& grids);

double agg_abs_consecutive(const std::vector<double>& values, bool signed_diffs = false);
double agg_bald_entropy(const std::vector<std::vector<double>>& grids);
double agg_balsa_kl_grid(const std::vector<std::vector<double>>& grids, bool normalize);
double agg_balsa_kl_pair(const std::vector<std::vector<double>>& grids);
double agg_balsa_emd(const std::vector<std::vector<double>>& sample_sets);

// ---- Per-candidate scoring ----

// Score one unlabeled point. `masks` is the round's shared set of dropout
// realizations (k entries for the MC scorers, ignored by std/lc/entropy);
// `stream` must be forked per candidate from (seed, round, candidate row) by
// the caller and seeds only the sample draws, so serial and parallel scoring
// agree bitwise.
double score_candidate(const Model& model, const std::vector<double>& x,
                       const std::string& acquisition, const McConfig& mc,
                       const std::vector<EncoderMasks>& masks, RngStream stream);

enum class ScoreExec { kSerial, kParallel };

// Scores for the given rows of X (global row ids double as the candidate
// stream ids). Draws one mask set per call from round_rng at mc.dropout_eval
// (or the model's rate when negative). kParallel distributes candidates over
// OpenMP threads and is bitwise identical to kSerial.
std::vector<double> score_pool(const Model& model, const Tensor& X,
                               const std::vector<std::size_t>& rows,
                               const std::string& acquisition, const McConfig& mc,
                               const RngStream& round_rng,
                               ScoreExec exec = ScoreExec::kParallel);

// ---- Selection ----

// Positions of the tau largest scores, ties broken toward the smallest
// position, output ascending.
std::vector<std::size_t> select_top_tau(const std::vector<double>& scores, std::size_t tau);

// Greedy k-center in latent space: repeatedly take the unlabeled point
// farthest from every labeled-or-already-selected point.
std::vector<std::size_t> coreset_select(const std::vector<std::vector<double>>& latents_labeled,
                                        const std::vector<std::vector<double>>& latents_unlabeled,
                                        std::size_t tau);

// k-means into |L|+tau clusters; clusters without labeled points first
// (largest unlabeled count first), one pick per cluster and pass, most
// typical point within the cluster (inverse mean distance to its nearest
// in-cluster neighbors, at most 20).
std::vector<std::size_t> typiclust_select(const std::vector<std::vector<double>>& latents_labeled,
                                          const std::vector<std::vector<double>>& latents_unlabeled,
                                          std::size_t tau, RngStream rng);

std::vector<std::size_t> random_select(std::size_t pool_size, std::size_t tau, RngStream& rng);

}  // namespace flowal
