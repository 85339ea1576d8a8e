#include "flowal/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace flowal {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct Linear {
    Tensor w, b;  // w [in, out], b [1, out]
    Linear() = default;
    Linear(std::size_t in, std::size_t out) : w(in, out), b(1, out) {}

    void init_uniform(RngStream& rng, double gain2) {
        const double bound = std::sqrt(3.0 * gain2 / static_cast<double>(w.rows()));
        for (double& v : w.data) v = bound * (2.0 * rng.uniform() - 1.0);
        std::fill(b.data.begin(), b.data.end(), 0.0);
    }

    void init_zero() {
        std::fill(w.data.begin(), w.data.end(), 0.0);
        std::fill(b.data.begin(), b.data.end(), 0.0);
    }
};

VarId linear_tape(Tape& t, Linear& lin, VarId x) {
    return t.add(t.matmul(x, t.leaf(lin.w)), t.leaf(lin.b));
}

// out = W^T x + b for one row
void linear_row(const Linear& lin, const std::vector<double>& in,
                std::vector<double>& out) {
    const std::size_t no = lin.w.cols();
    out.assign(lin.b.data.begin(), lin.b.data.end());
    for (std::size_t i = 0; i < lin.w.rows(); ++i) {
        const double v = in[i];
        if (v == 0.0) continue;
        const double* wr = lin.w.data.data() + i * no;
        for (std::size_t j = 0; j < no; ++j) out[j] += v * wr[j];
    }
}

// Encoder: Linear -> ReLU -> Dropout for every layer.
VarId encoder_tape(Tape& t, std::vector<Linear>& layers, VarId x, double rate,
                   DropoutMode mode, RngStream& rng) {
    VarId h = x;
    for (Linear& lin : layers) {
        h = t.relu(linear_tape(t, lin, h));
        h = t.dropout(h, rate, mode, rng);
    }
    return h;
}

std::vector<double> encoder_plain(const std::vector<Linear>& layers,
                                  const std::vector<double>& x,
                                  const EncoderMasks* masks) {
    std::vector<double> h = x, nxt;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        linear_row(layers[l], h, nxt);
        for (double& v : nxt) v = v > 0.0 ? v : 0.0;
        if (masks && !masks->empty())
            for (std::size_t j = 0; j < nxt.size(); ++j) nxt[j] *= masks->layers[l][j];
        h = nxt;
    }
    return h;
}

// Conditioner / head chain: hidden ReLU layers, raw linear output, no dropout.
VarId chain_tape(Tape& t, std::vector<Linear>& layers, VarId x) {
    VarId h = x;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l)
        h = t.relu(linear_tape(t, layers[l], h));
    return linear_tape(t, layers.back(), h);
}

std::vector<double> chain_plain(const std::vector<Linear>& layers,
                                const std::vector<double>& x) {
    std::vector<double> h = x, nxt;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        linear_row(layers[l], h, nxt);
        for (double& v : nxt) v = v > 0.0 ? v : 0.0;
        h = nxt;
    }
    linear_row(layers.back(), h, nxt);
    return nxt;
}

// Row-wise softmax. The row-max shift is treated as a constant, which is
// gradient-exact because softmax is shift invariant.
VarId softmax_rows(Tape& t, VarId a) {
    const std::size_t r = t.rows(a), c = t.cols(a);
    Tensor mx(r, 1);
    const auto& v = t.val(a);
    for (std::size_t i = 0; i < r; ++i) {
        double m = v[i * c];
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, v[i * c + j]);
        mx.data[i] = m;
    }
    const VarId e = t.exp(t.sub(a, t.constant(std::move(mx))));
    return t.div(e, t.sum_rows(e));
}

// Cumulative knot positions from a K-column raw block: softmax fractions,
// floor at minv, running sum scaled onto [-bound, bound] with a leading
// -bound column. Output is [N, K+1].
VarId knots_tape(Tape& t, VarId raw_block, double minv, double bound) {
    const std::size_t n = t.rows(raw_block), K = t.cols(raw_block);
    const VarId frac = softmax_rows(t, raw_block);
    const VarId w =
        t.affine(frac, 1.0 - static_cast<double>(K) * minv, minv);
    Tensor tri(K, K);
    for (std::size_t j = 0; j < K; ++j)
        for (std::size_t k = j; k < K; ++k) tri.at(j, k) = 1.0;
    const VarId cum = t.matmul(w, t.constant(std::move(tri)));
    const VarId cat = t.concat_cols(t.constant(n, 1, 0.0), cum);
    return t.affine(cat, 2.0 * bound, -bound);
}

struct TapeSpline {
    VarId out;
    VarId log_deriv;
};

// Differentiable rational-quadratic spline of y_in under per-row raw
// parameters [N, 3K-1]. Bin indices come from current values (the transform
// is piecewise; within a bin everything is smooth). Rows outside
// (-bound, bound) pass through unchanged with zero log-derivative.
TapeSpline spline_tape(Tape& t, VarId raw, VarId y_in, const SplineDefaults& def) {
    const std::size_t n = t.rows(y_in);
    const std::size_t K = def.bins;
    if (t.cols(raw) != 3 * K - 1)
        throw std::invalid_argument("spline_tape: raw parameter width mismatch");

    const VarId xk = knots_tape(t, t.slice_cols(raw, 0, K), def.min_width, def.bound);
    const VarId yk =
        knots_tape(t, t.slice_cols(raw, K, 2 * K), def.min_height, def.bound);

    const VarId d_int = t.affine(
        t.softplus(t.affine(t.slice_cols(raw, 2 * K, 3 * K - 1), 1.0,
                            derivative_shift(def.min_derivative))),
        1.0, def.min_derivative);
    const VarId ones = t.constant(n, 1, 1.0);
    const VarId dk = t.concat_cols(t.concat_cols(ones, d_int), ones);

    const VarId y_cl = t.clamp(y_in, -def.bound, def.bound);

    // per-row bin index from values
    const auto& kv = t.val(xk);
    const auto& yv = t.val(y_cl);
    std::vector<std::int32_t> lo(n), hi(n);
    Tensor in_range(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = yv[i];
        std::size_t b = K - 1;
        for (std::size_t k = 1; k < K; ++k)
            if (y < kv[i * (K + 1) + k]) {
                b = k - 1;
                break;
            }
        lo[i] = static_cast<std::int32_t>(b);
        hi[i] = static_cast<std::int32_t>(b + 1);
        const double yo = t.val(y_in)[i];
        in_range.data[i] = (yo > -def.bound && yo < def.bound) ? 1.0 : 0.0;
    }

    const VarId x0 = t.gather_cols(xk, lo);
    const VarId x1 = t.gather_cols(xk, hi);
    const VarId y0 = t.gather_cols(yk, lo);
    const VarId y1 = t.gather_cols(yk, hi);
    const VarId d0 = t.gather_cols(dk, lo);
    const VarId d1 = t.gather_cols(dk, hi);

    const VarId w = t.sub(x1, x0);
    const VarId h = t.sub(y1, y0);
    const VarId s = t.div(h, w);
    const VarId xi = t.div(t.sub(y_cl, x0), w);
    const VarId om = t.affine(xi, -1.0, 1.0);  // 1 - xi
    const VarId th = t.mul(xi, om);
    const VarId r = t.sub(t.add(d1, d0), t.affine(s, 2.0, 0.0));
    const VarId denom = t.add(s, t.mul(r, th));

    const VarId num =
        t.mul(h, t.add(t.mul(s, t.square(xi)), t.mul(d0, th)));
    const VarId value = t.add(y0, t.div(num, denom));

    const VarId dnum = t.mul(
        t.square(s),
        t.add(t.mul(d1, t.square(xi)),
              t.add(t.affine(t.mul(s, th), 2.0, 0.0), t.mul(d0, t.square(om)))));
    const VarId log_deriv = t.log(t.div(dnum, t.square(denom)));

    const VarId mask = t.constant(std::move(in_range));
    const VarId inv_mask = t.affine(mask, -1.0, 1.0);
    TapeSpline out;
    out.out = t.add(t.mul(value, mask), t.mul(y_in, inv_mask));
    out.log_deriv = t.mul(log_deriv, mask);
    return out;
}

class GaussianPredictive final : public PredictiveDistribution {
  public:
    GaussianPredictive(double mu, double sigma) : mu_(mu), sigma_(sigma) {}

    double log_prob(double y) const override {
        const double z = (y - mu_) / sigma_;
        return -kHalfLog2Pi - std::log(sigma_) - 0.5 * z * z;
    }

    bool location_scale(double& mu, double& sigma) const override {
        mu = mu_;
        sigma = sigma_;
        return true;
    }

    void sample(std::size_t n, RngStream rng, std::vector<double>& ys,
                std::vector<double>* lps) const override {
        ys.resize(n);
        if (lps) lps->resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = rng.normal();
            ys[i] = mu_ + sigma_ * z;
            if (lps) (*lps)[i] = -kHalfLog2Pi - std::log(sigma_) - 0.5 * z * z;
        }
    }

    double mu() const { return mu_; }
    double sigma() const { return sigma_; }

  private:
    double mu_, sigma_;
};

class FlowPredictive final : public PredictiveDistribution {
  public:
    explicit FlowPredictive(std::vector<SplineParams> layers)
        : layers_(std::move(layers)) {}

    double log_prob(double y) const override {
        double x = y, ld = 0.0;
        for (const SplineParams& p : layers_) {
            const SplineEval e = spline_forward(p, x);
            x = e.value;
            ld += e.log_deriv;
        }
        return -kHalfLog2Pi - 0.5 * x * x + ld;
    }

    void sample(std::size_t n, RngStream rng, std::vector<double>& ys,
                std::vector<double>* lps) const override {
        ys.resize(n);
        if (lps) lps->resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = rng.normal();
            double v = z, ld = 0.0;
            for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
                const SplineEval e = spline_inverse(*it, v);
                v = e.value;
                ld += e.log_deriv;
            }
            ys[i] = v;
            if (lps) (*lps)[i] = -kHalfLog2Pi - 0.5 * z * z - ld;
        }
    }

  private:
    std::vector<SplineParams> layers_;
};

void check_features(const ModelConfig& cfg, std::size_t got) {
    if (got != cfg.feature_dim)
        throw std::invalid_argument("model: expected " +
                                    std::to_string(cfg.feature_dim) +
                                    " features, got " + std::to_string(got));
}

std::vector<Linear> build_encoder(const ModelConfig& cfg) {
    std::vector<Linear> enc;
    std::size_t prev = cfg.feature_dim;
    for (std::size_t wdt : cfg.encoder_widths) {
        enc.emplace_back(prev, wdt);
        prev = wdt;
    }
    return enc;
}

class GaussianModel final : public Model {
  public:
    explicit GaussianModel(ModelConfig cfg)
        : Model(std::move(cfg)),
          encoder_(build_encoder(cfg_)),
          mu_(cfg_.encoder_widths.back(), 1),
          sigma_(cfg_.encoder_widths.back(), 1) {}

    void init(RngStream& rng) override {
        for (Linear& l : encoder_) l.init_uniform(rng, 2.0);
        mu_.init_uniform(rng, 1.0);
        sigma_.init_uniform(rng, 1.0);
    }

    VarId nll(Tape& t, const Tensor& X, const Tensor& Y, DropoutMode mode,
              RngStream& rng) override {
        if (X.rows() == 0) throw std::invalid_argument("nll: empty batch");
        check_features(cfg_, X.cols());
        const VarId h = encoder_tape(t, encoder_, t.constant(X),
                                     cfg_.dropout_train, mode, rng);
        const VarId mu = linear_tape(t, mu_, h);
        const VarId sigma =
            t.affine(t.softplus(linear_tape(t, sigma_, h)), 1.0, cfg_.sigma_floor);
        const VarId z = t.div(t.sub(t.constant(Y), mu), sigma);
        const VarId per =
            t.add(t.affine(t.square(z), 0.5, kHalfLog2Pi), t.log(sigma));
        return t.mean_all(per);
    }

    std::unique_ptr<PredictiveDistribution> predictive(
        const std::vector<double>& x, const EncoderMasks* masks) const override {
        check_features(cfg_, x.size());
        const std::vector<double> h = encoder_plain(encoder_, x, masks);
        std::vector<double> mu, sraw;
        linear_row(mu_, h, mu);
        linear_row(sigma_, h, sraw);
        const double sp = sraw[0] > 35.0 ? sraw[0] : std::log1p(std::exp(sraw[0]));
        return std::make_unique<GaussianPredictive>(mu[0], sp + cfg_.sigma_floor);
    }

    std::vector<double> latent_eval(const std::vector<double>& x) const override {
        check_features(cfg_, x.size());
        return encoder_plain(encoder_, x, nullptr);
    }

    std::vector<std::pair<std::string, Tensor*>> named_params() override {
        std::vector<std::pair<std::string, Tensor*>> out;
        for (std::size_t l = 0; l < encoder_.size(); ++l) {
            out.emplace_back("encoder." + std::to_string(l) + ".w", &encoder_[l].w);
            out.emplace_back("encoder." + std::to_string(l) + ".b", &encoder_[l].b);
        }
        out.emplace_back("mu.w", &mu_.w);
        out.emplace_back("mu.b", &mu_.b);
        out.emplace_back("sigma.w", &sigma_.w);
        out.emplace_back("sigma.b", &sigma_.b);
        return out;
    }

  private:
    std::vector<Linear> encoder_;
    Linear mu_, sigma_;
};

class FlowModel final : public Model {
  public:
    explicit FlowModel(ModelConfig cfg)
        : Model(std::move(cfg)), encoder_(build_encoder(cfg_)) {
        defaults_.bins = cfg_.spline_bins;
        defaults_.bound = cfg_.tail_bound;
        const std::size_t out = 3 * cfg_.spline_bins - 1;
        conditioners_.resize(cfg_.flow_layers);
        for (auto& cond : conditioners_) {
            std::size_t prev = cfg_.encoder_widths.back();
            for (std::size_t wdt : cfg_.conditioner_widths) {
                cond.emplace_back(prev, wdt);
                prev = wdt;
            }
            cond.emplace_back(prev, out);
        }
    }

    void init(RngStream& rng) override {
        for (Linear& l : encoder_) l.init_uniform(rng, 2.0);
        for (auto& cond : conditioners_) {
            for (std::size_t l = 0; l + 1 < cond.size(); ++l)
                cond[l].init_uniform(rng, 2.0);
            // zero output layer: every transform starts as the identity
            cond.back().init_zero();
        }
    }

    VarId nll(Tape& t, const Tensor& X, const Tensor& Y, DropoutMode mode,
              RngStream& rng) override {
        if (X.rows() == 0) throw std::invalid_argument("nll: empty batch");
        check_features(cfg_, X.cols());
        const VarId z = encoder_tape(t, encoder_, t.constant(X),
                                     cfg_.dropout_train, mode, rng);
        VarId cur = t.constant(Y);
        VarId ld = t.constant(Y.rows(), 1, 0.0);
        for (auto& cond : conditioners_) {
            const TapeSpline sp = spline_tape(t, chain_tape(t, cond, z), cur, defaults_);
            cur = sp.out;
            ld = t.add(ld, sp.log_deriv);
        }
        const VarId per = t.sub(t.affine(t.square(cur), 0.5, kHalfLog2Pi), ld);
        return t.mean_all(per);
    }

    std::unique_ptr<PredictiveDistribution> predictive(
        const std::vector<double>& x, const EncoderMasks* masks) const override {
        check_features(cfg_, x.size());
        const std::vector<double> h = encoder_plain(encoder_, x, masks);
        std::vector<SplineParams> layers;
        layers.reserve(conditioners_.size());
        for (const auto& cond : conditioners_) {
            const std::vector<double> raw = chain_plain(cond, h);
            layers.push_back(make_spline_params(raw.data(), defaults_));
        }
        return std::make_unique<FlowPredictive>(std::move(layers));
    }

    std::vector<double> latent_eval(const std::vector<double>& x) const override {
        check_features(cfg_, x.size());
        return encoder_plain(encoder_, x, nullptr);
    }

    std::vector<std::pair<std::string, Tensor*>> named_params() override {
        std::vector<std::pair<std::string, Tensor*>> out;
        for (std::size_t l = 0; l < encoder_.size(); ++l) {
            out.emplace_back("encoder." + std::to_string(l) + ".w", &encoder_[l].w);
            out.emplace_back("encoder." + std::to_string(l) + ".b", &encoder_[l].b);
        }
        for (std::size_t f = 0; f < conditioners_.size(); ++f)
            for (std::size_t l = 0; l < conditioners_[f].size(); ++l) {
                const std::string base =
                    "flow." + std::to_string(f) + "." + std::to_string(l);
                out.emplace_back(base + ".w", &conditioners_[f][l].w);
                out.emplace_back(base + ".b", &conditioners_[f][l].b);
            }
        return out;
    }

  private:
    std::vector<Linear> encoder_;
    std::vector<std::vector<Linear>> conditioners_;
    SplineDefaults defaults_;
};

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"family", c.family},
            {"feature_dim", c.feature_dim},
            {"encoder_widths", c.encoder_widths},
            {"dropout_train", c.dropout_train},
            {"dropout_eval", c.dropout_eval},
            {"sigma_floor", c.sigma_floor},
            {"conditioner_widths", c.conditioner_widths},
            {"flow_layers", c.flow_layers},
            {"spline_bins", c.spline_bins},
            {"tail_bound", c.tail_bound}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    j.at("family").get_to(c.family);
    j.at("feature_dim").get_to(c.feature_dim);
    j.at("encoder_widths").get_to(c.encoder_widths);
    j.at("dropout_train").get_to(c.dropout_train);
    j.at("dropout_eval").get_to(c.dropout_eval);
    j.at("sigma_floor").get_to(c.sigma_floor);
    j.at("conditioner_widths").get_to(c.conditioner_widths);
    j.at("flow_layers").get_to(c.flow_layers);
    j.at("spline_bins").get_to(c.spline_bins);
    j.at("tail_bound").get_to(c.tail_bound);
    return c;
}

}  // namespace

std::vector<double> PredictiveDistribution::grid_likelihoods(
    std::size_t resolution) const {
    if (resolution < 2)
        throw std::invalid_argument("grid_likelihoods: resolution < 2");
    std::vector<double> v(resolution);
    for (std::size_t n = 0; n < resolution; ++n)
        v[n] = std::exp(
            log_prob(static_cast<double>(n) / static_cast<double>(resolution - 1)));
    return v;
}

double Model::nll_value(const Tensor& X, const Tensor& Y) {
    Tape t;
    RngStream rng(0);
    return t.scalar(nll(t, X, Y, DropoutMode::kEval, rng));
}

std::unique_ptr<Model> make_model(const ModelConfig& cfg) {
    if (cfg.feature_dim == 0)
        throw std::invalid_argument("make_model: feature_dim not set");
    if (cfg.encoder_widths.empty())
        throw std::invalid_argument("make_model: empty encoder");
    if (cfg.family == "gaussian") return std::make_unique<GaussianModel>(cfg);
    if (cfg.family == "flow") return std::make_unique<FlowModel>(cfg);
    throw std::invalid_argument("make_model: unknown family '" + cfg.family + "'");
}

EncoderMasks draw_masks(const ModelConfig& cfg, double rate, RngStream rng) {
    EncoderMasks m;
    if (rate == 0.0) return m;
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("draw_masks: rate must be in [0,1)");
    const double scale = 1.0 / (1.0 - rate);
    m.layers.resize(cfg.encoder_widths.size());
    for (std::size_t l = 0; l < cfg.encoder_widths.size(); ++l) {
        m.layers[l].resize(cfg.encoder_widths[l]);
        for (double& v : m.layers[l]) v = rng.uniform() < rate ? 0.0 : scale;
    }
    return m;
}

std::vector<EncoderMasks> draw_mask_set(const ModelConfig& cfg, std::size_t k,
                                        double rate, const RngStream& rng) {
    if (k < 1) throw std::invalid_argument("draw_mask_set: k < 1");
    std::vector<EncoderMasks> masks;
    masks.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        masks.push_back(draw_masks(cfg, rate, rng.fork(kTagMask, i)));
    return masks;
}

std::vector<std::unique_ptr<PredictiveDistribution>> masked_predictives(
    const Model& model, const std::vector<double>& x,
    const std::vector<EncoderMasks>& masks) {
    std::vector<std::unique_ptr<PredictiveDistribution>> out;
    out.reserve(masks.size());
    for (const EncoderMasks& m : masks)
        out.push_back(model.predictive(x, m.empty() ? nullptr : &m));
    return out;
}

std::vector<std::unique_ptr<PredictiveDistribution>> mc_distributions(
    const Model& model, const std::vector<double>& x, std::size_t k,
    const RngStream& rng, double rate_override) {
    const double rate =
        rate_override < 0.0 ? model.config().dropout_eval : rate_override;
    return masked_predictives(model, x, draw_mask_set(model.config(), k, rate, rng));
}

std::vector<std::vector<double>> snapshot_params(Model& m) {
    std::vector<std::vector<double>> snap;
    for (auto& [name, t] : m.named_params()) snap.push_back(t->data);
    return snap;
}

void restore_params(Model& m, const std::vector<std::vector<double>>& snap) {
    auto params = m.named_params();
    if (params.size() != snap.size())
        throw std::invalid_argument("restore_params: snapshot size mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) {
        if (params[i].second->data.size() != snap[i].size())
            throw std::invalid_argument("restore_params: shape mismatch at " +
                                        params[i].first);
        params[i].second->data = snap[i];
    }
}

void save_checkpoint(Model& m, const std::string& path) {
    nlohmann::json header;
    header["config"] = config_to_json(m.config());
    nlohmann::json manifest = nlohmann::json::array();
    for (auto& [name, t] : m.named_params())
        manifest.push_back({{"name", name}, {"shape", t->shape}});
    header["tensors"] = manifest;
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write("FLOWALC1", 8);
    const std::uint64_t hl = hs.size();
    f.write(reinterpret_cast<const char*>(&hl), sizeof hl);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (auto& [name, t] : m.named_params())
        f.write(reinterpret_cast<const char*>(t->data.data()),
                static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("save_checkpoint: write failed on " + path);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "FLOWALC1", 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    std::uint64_t hl = 0;
    f.read(reinterpret_cast<char*>(&hl), sizeof hl);
    std::string hs(hl, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hl));
    const nlohmann::json header = nlohmann::json::parse(hs);

    auto model = make_model(config_from_json(header.at("config")));
    const auto& manifest = header.at("tensors");
    auto params = model->named_params();
    if (manifest.size() != params.size())
        throw std::runtime_error("load_checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (manifest[i].at("name").get<std::string>() != params[i].first)
            throw std::runtime_error("load_checkpoint: tensor order mismatch at " +
                                     params[i].first);
        Tensor& t = *params[i].second;
        f.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
    return model;
}

}  // namespace flowal
