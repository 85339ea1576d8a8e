#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "flowal/rng.hpp"
#include "flowal/spline.hpp"
#include "flowal/tape.hpp"
#include "flowal/tensor.hpp"

namespace flowal {

struct ModelConfig {
    std::string family = "gaussian";  // "gaussian" | "flow"
    std::size_t feature_dim = 0;
    std::vector<std::size_t> encoder_widths{32, 64, 128};
    double dropout_train = 0.05;
    double dropout_eval = 0.05;  // rate used when drawing MC masks for scoring
    double sigma_floor = 1e-3;
    // flow family
    std::vector<std::size_t> conditioner_widths{128, 128};
    std::size_t flow_layers = 2;
    std::size_t spline_bins = 8;
    double tail_bound = 4.0;
};

// One realized dropout configuration of the encoder: a scale factor per unit
// per layer (0 for dropped units, 1/(1-rate) otherwise). Empty = no dropout.
struct EncoderMasks {
    std::vector<std::vector<double>> layers;
    bool empty() const { return layers.empty(); }
};

// The conditional density a model assigns to the (normalized) target after
// one dropout realization. Handles are immutable and cheap to evaluate.
class PredictiveDistribution {
  public:
    virtual ~PredictiveDistribution() = default;

    virtual double log_prob(double y) const = 0;

    // Gaussian heads expose (mu, sigma) so evaluation can use closed forms;
    // flows return false and are handled by sampling.
    virtual bool location_scale(double& mu, double& sigma) const {
        (void)mu;
        (void)sigma;
        return false;
    }

    // Draw n values; when lps is given, also return each draw's log density
    // (computed on the sampling path, no extra inversion needed).
    virtual void sample(std::size_t n, RngStream rng, std::vector<double>& ys,
                        std::vector<double>* lps = nullptr) const = 0;

    // exp(log_prob) on `resolution` evenly spaced points spanning [0,1].
    std::vector<double> grid_likelihoods(std::size_t resolution = 200) const;
};

class Model {
  public:
    explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {}
    virtual ~Model() = default;

    const ModelConfig& config() const { return cfg_; }

    virtual void init(RngStream& rng) = 0;

    // Mean NLL of the batch, differentiable through all parameters. Training
    // mode draws fresh dropout masks from rng at cfg.dropout_train.
    virtual VarId nll(Tape& t, const Tensor& X, const Tensor& Y,
                      DropoutMode mode, RngStream& rng) = 0;

    // Handle bound to one input row and one mask realization (pass nullptr
    // for deterministic evaluation).
    virtual std::unique_ptr<PredictiveDistribution> predictive(
        const std::vector<double>& x, const EncoderMasks* masks) const = 0;

    virtual std::vector<std::pair<std::string, Tensor*>> named_params() = 0;

    // Encoder output without dropout; the latent space used by the
    // geometric selectors.
    virtual std::vector<double> latent_eval(const std::vector<double>& x) const = 0;

    double nll_value(const Tensor& X, const Tensor& Y);  // eval mode

  protected:
    ModelConfig cfg_;
};

std::unique_ptr<Model> make_model(const ModelConfig& cfg);

EncoderMasks draw_masks(const ModelConfig& cfg, double rate, RngStream rng);

// k mask realizations, mask i from rng.fork(kTagMask, i). Acquisition draws
// one set per round and scores every candidate under it, so pool points are
// compared across the same k model instances rather than a private lottery.
std::vector<EncoderMasks> draw_mask_set(const ModelConfig& cfg, std::size_t k,
                                        double rate, const RngStream& rng);

// Handles for one input under explicit mask realizations (empty mask = no
// dropout for that realization).
std::vector<std::unique_ptr<PredictiveDistribution>> masked_predictives(
    const Model& model, const std::vector<double>& x,
    const std::vector<EncoderMasks>& masks);

// draw_mask_set + masked_predictives at cfg.dropout_eval (or `rate_override`
// when non-negative — dual-mode scoring uses a higher rate than training).
std::vector<std::unique_ptr<PredictiveDistribution>> mc_distributions(
    const Model& model, const std::vector<double>& x, std::size_t k,
    const RngStream& rng, double rate_override = -1.0);

std::vector<std::vector<double>> snapshot_params(Model& m);
void restore_params(Model& m, const std::vector<std::vector<double>>& snap);

void save_checkpoint(Model& m, const std::string& path);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

}  // namespace flowal
