#include "flowal/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "flowal/metrics.hpp"

namespace flowal {

const std::vector<std::string> kAcquisitionNames = {
    "random",       "coreset",      "typiclust",          "std",
    "lc",           "entropy",      "bald_sigma",         "bald_lc",
    "bald_entropy", "nflows_out",   "balsa_kl_grid",      "balsa_kl_grid_norm",
    "balsa_kl_pair", "balsa_emd"};

bool acquisition_needs_mc(const std::string& name) {
    return name.rfind("bald_", 0) == 0 || name.rfind("balsa_", 0) == 0 ||
           name == "nflows_out";
}

bool acquisition_is_geometric(const std::string& name) {
    return name == "random" || name == "coreset" || name == "typiclust";
}

std::vector<double> mean_grid(const std::vector<std::vector<double>>& grids) {
    if (grids.empty()) throw std::invalid_argument("mean_grid: no grids");
    const std::size_t r = grids[0].size();
    for (const auto& g : grids)
        if (g.size() != r) throw std::invalid_argument("mean_grid: length mismatch");
    std::vector<double> out(r);
    const auto k = static_cast<long double>(grids.size());
    for (std::size_t j = 0; j < r; ++j) {
        long double acc = 0.0L;
        for (const auto& g : grids) acc += static_cast<long double>(g[j]);
        out[j] = static_cast<double>(acc / k);
    }
    return out;
}

double agg_abs_consecutive(const std::vector<double>& values, bool signed_diffs) {
    if (values.size() < 2)
        throw std::invalid_argument("consecutive aggregate needs k >= 2");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        const double d = values[i] - values[i + 1];
        s += signed_diffs ? d : std::fabs(d);
    }
    return s;
}

double agg_bald_entropy(const std::vector<std::vector<double>>& grids) {
    if (grids.size() < 2) throw std::invalid_argument("bald_entropy needs k >= 2");
    const std::vector<double> mean = mean_grid(grids);
    const double h_mean = continuous_entropy(mean);
    double s = 0.0;
    for (const auto& g : grids) s += h_mean - continuous_entropy(g);
    return s;
}

namespace {

void require_nonzero_mean(const std::vector<double>& mean) {
    for (double v : mean)
        if (v != 0.0) return;
    throw std::runtime_error("balsa_kl_grid: mean likelihood vector is all zero");
}

}  // namespace

double agg_balsa_kl_grid(const std::vector<std::vector<double>>& grids, bool normalize) {
    if (grids.size() < 2) throw std::invalid_argument("balsa_kl_grid needs k >= 2");
    std::vector<double> mean = mean_grid(grids);
    require_nonzero_mean(mean);
    if (normalize) {
        const double mass = trapz(mean);
        for (double& v : mean) v /= mass;
    }
    double s = 0.0;
    for (const auto& g : grids) s += discrete_kl(g, mean);
    return s;
}

double agg_balsa_kl_pair(const std::vector<std::vector<double>>& grids) {
    if (grids.size() < 2) throw std::invalid_argument("balsa_kl_pair needs k >= 2");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < grids.size(); ++i)
        s += discrete_kl(grids[i], grids[i + 1]);
    return s;
}

double agg_balsa_emd(const std::vector<std::vector<double>>& sample_sets) {
    if (sample_sets.size() < 2) throw std::invalid_argument("balsa_emd needs k >= 2");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < sample_sets.size(); ++i)
        s += emd_1d(sample_sets[i], sample_sets[i + 1]);
    return s;
}

namespace {

// Negative peak density over m draws: confident (sharply peaked) predictions
// score low.
double lc_value(const PredictiveDistribution& d, std::size_t m, RngStream draws) {
    std::vector<double> ys, lps;
    d.sample(m, draws, ys, &lps);
    double peak = -std::numeric_limits<double>::infinity();
    for (double lp : lps) peak = std::max(peak, std::exp(lp));
    return -peak;
}

double nflows_h(const PredictiveDistribution& d, std::size_t m, RngStream draws) {
    std::vector<double> ys, lps;
    d.sample(m, draws, ys, &lps);
    return -std::accumulate(lps.begin(), lps.end(), 0.0);
}

}  // namespace

double score_candidate(const Model& model, const std::vector<double>& x,
                       const std::string& acquisition, const McConfig& mc,
                       const std::vector<EncoderMasks>& masks, RngStream stream) {
    if (mc.m < 2) throw std::invalid_argument("score_candidate: m < 2");
    if (mc.grid_resolution < 2)
        throw std::invalid_argument("score_candidate: grid resolution < 2");

    if (acquisition == "std") {
        std::vector<double> ys;
        model.predictive(x, nullptr)->sample(mc.m, stream.fork(kTagSamples), ys);
        return sample_std(ys);
    }
    if (acquisition == "lc")
        return lc_value(*model.predictive(x, nullptr), mc.m, stream.fork(kTagSamples));
    if (acquisition == "entropy")
        return continuous_entropy(
            model.predictive(x, nullptr)->grid_likelihoods(mc.grid_resolution));

    if (!acquisition_needs_mc(acquisition))
        throw std::invalid_argument("score_candidate: '" + acquisition +
                                    "' is not a scored acquisition");
    if (masks.size() < 2) throw std::invalid_argument("score_candidate: k < 2");

    const auto handles = masked_predictives(model, x, masks);
    // one sample substream per candidate, an identical copy per realization:
    // with dropout 0 all realizations draw the same values and every
    // disagreement term vanishes exactly
    const RngStream draws = stream.fork(kTagSamples);

    if (acquisition == "bald_sigma" || acquisition == "bald_lc") {
        std::vector<double> per(handles.size());
        for (std::size_t i = 0; i < handles.size(); ++i) {
            if (acquisition == "bald_sigma") {
                std::vector<double> ys;
                handles[i]->sample(mc.m, draws, ys);
                per[i] = sample_std(ys);
            } else {
                per[i] = lc_value(*handles[i], mc.m, draws);
            }
        }
        return agg_abs_consecutive(per, mc.signed_bald_diffs);
    }
    if (acquisition == "nflows_out") {
        std::vector<double> per(handles.size());
        for (std::size_t i = 0; i < handles.size(); ++i)
            per[i] = nflows_h(*handles[i], mc.m, draws);
        return agg_abs_consecutive(per, false);
    }
    if (acquisition == "balsa_emd") {
        std::vector<std::vector<double>> sets(handles.size());
        for (std::size_t i = 0; i < handles.size(); ++i)
            handles[i]->sample(mc.m, draws, sets[i]);
        return agg_balsa_emd(sets);
    }

    std::vector<std::vector<double>> grids(handles.size());
    for (std::size_t i = 0; i < handles.size(); ++i)
        grids[i] = handles[i]->grid_likelihoods(mc.grid_resolution);
    if (acquisition == "bald_entropy") return agg_bald_entropy(grids);
    if (acquisition == "balsa_kl_grid") return agg_balsa_kl_grid(grids, false);
    if (acquisition == "balsa_kl_grid_norm") return agg_balsa_kl_grid(grids, true);
    if (acquisition == "balsa_kl_pair") return agg_balsa_kl_pair(grids);
    throw std::invalid_argument("score_candidate: unknown acquisition '" + acquisition + "'");
}

std::vector<double> score_pool(const Model& model, const Tensor& X,
                               const std::vector<std::size_t>& rows,
                               const std::string& acquisition, const McConfig& mc,
                               const RngStream& round_rng, ScoreExec exec) {
    std::vector<double> out(rows.size());
    // the k model instances every candidate is compared under this round
    std::vector<EncoderMasks> masks;
    if (acquisition_needs_mc(acquisition)) {
        if (mc.k < 2) throw std::invalid_argument("score_pool: k < 2");
        const double rate =
            mc.dropout_eval < 0.0 ? model.config().dropout_eval : mc.dropout_eval;
        masks = draw_mask_set(model.config(), mc.k, rate, round_rng);
    }
    std::exception_ptr error;
    const auto n = static_cast<std::ptrdiff_t>(rows.size());
    auto one = [&](std::ptrdiff_t i) {
        const std::size_t row = rows[static_cast<std::size_t>(i)];
        std::vector<double> x(X.cols());
        for (std::size_t j = 0; j < X.cols(); ++j) x[j] = X.at(row, j);
        const double s = score_candidate(model, x, acquisition, mc, masks,
                                         round_rng.fork(kTagCandidate, row));
        if (!std::isfinite(s))
            throw std::runtime_error("score_pool: non-finite score at row " +
                                     std::to_string(row));
        out[static_cast<std::size_t>(i)] = s;
    };
    if (exec == ScoreExec::kParallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            try {
                one(i);
            } catch (...) {
#pragma omp critical
                if (!error) error = std::current_exception();
            }
        }
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
    }
    if (error) std::rethrow_exception(error);
    return out;
}

std::vector<std::size_t> select_top_tau(const std::vector<double>& scores, std::size_t tau) {
    if (tau > scores.size())
        throw std::invalid_argument("select_top_tau: tau exceeds pool size");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(tau),
                      order.end(), [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    order.resize(tau);
    std::sort(order.begin(), order.end());
    return order;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

std::vector<std::size_t> coreset_select(const std::vector<std::vector<double>>& latents_labeled,
                                        const std::vector<std::vector<double>>& latents_unlabeled,
                                        std::size_t tau) {
    if (latents_labeled.empty() || latents_unlabeled.empty())
        throw std::invalid_argument("coreset_select: empty pool");
    if (tau > latents_unlabeled.size())
        throw std::invalid_argument("coreset_select: tau exceeds pool size");

    const std::size_t n = latents_unlabeled.size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    for (std::size_t u = 0; u < n; ++u)
        for (const auto& l : latents_labeled)
            dist[u] = std::min(dist[u], sq_dist(latents_unlabeled[u], l));

    std::vector<std::size_t> picked;
    picked.reserve(tau);
    for (std::size_t t = 0; t < tau; ++t) {
        std::size_t best = n;
        for (std::size_t u = 0; u < n; ++u)
            if (dist[u] >= 0.0 && (best == n || dist[u] > dist[best])) best = u;
        picked.push_back(best);
        dist[best] = -1.0;  // consumed
        for (std::size_t u = 0; u < n; ++u)
            if (dist[u] >= 0.0)
                dist[u] = std::min(dist[u],
                                   sq_dist(latents_unlabeled[u], latents_unlabeled[best]));
    }
    return picked;
}

namespace {

struct KMeans {
    std::vector<std::vector<double>> centers;
    std::vector<std::size_t> assign;
};

KMeans k_means(const std::vector<std::vector<double>>& pts, std::size_t k, RngStream& rng) {
    const std::size_t n = pts.size();
    KMeans km;
    km.assign.assign(n, 0);
    // k-means++ seeding
    km.centers.push_back(pts[rng.uniform_below(n)]);
    std::vector<double> d2(n);
    while (km.centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::numeric_limits<double>::infinity();
            for (const auto& c : km.centers) d2[i] = std::min(d2[i], sq_dist(pts[i], c));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = rng.uniform_below(n);  // all points coincide with centers
        } else {
            double target = rng.uniform() * total, run = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                run += d2[i];
                if (run >= target) {
                    pick = i;
                    break;
                }
            }
        }
        km.centers.push_back(pts[pick]);
    }

    const std::size_t dim = pts[0].size();
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < km.centers.size(); ++c) {
                const double d = sq_dist(pts[i], km.centers[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (km.assign[i] != best) {
                km.assign[i] = best;
                changed = true;
            }
        }
        std::vector<std::vector<double>> sums(km.centers.size(),
                                              std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(km.centers.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[km.assign[i]];
            for (std::size_t j = 0; j < dim; ++j) sums[km.assign[i]][j] += pts[i][j];
        }
        for (std::size_t c = 0; c < km.centers.size(); ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its center
            for (std::size_t j = 0; j < dim; ++j)
                km.centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
        }
        if (!changed && iter > 0) break;
    }
    return km;
}

// Inverse mean distance to the nearest in-cluster neighbours (at most 20).
double typicality(const std::vector<std::vector<double>>& pts, std::size_t self,
                  const std::vector<std::size_t>& cluster_members) {
    std::vector<double> d;
    d.reserve(cluster_members.size());
    for (std::size_t other : cluster_members)
        if (other != self) d.push_back(std::sqrt(sq_dist(pts[self], pts[other])));
    if (d.empty()) return std::numeric_limits<double>::infinity();
    const std::size_t kk = std::min<std::size_t>(20, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    const double mean =
        std::accumulate(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), 0.0) /
        static_cast<double>(kk);
    if (mean <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / mean;
}

}  // namespace

std::vector<std::size_t> typiclust_select(const std::vector<std::vector<double>>& latents_labeled,
                                          const std::vector<std::vector<double>>& latents_unlabeled,
                                          std::size_t tau, RngStream rng) {
    if (latents_labeled.empty() || latents_unlabeled.empty())
        throw std::invalid_argument("typiclust_select: empty pool");
    if (tau > latents_unlabeled.size())
        throw std::invalid_argument("typiclust_select: tau exceeds pool size");

    const std::size_t n_lab = latents_labeled.size();
    std::vector<std::vector<double>> all(latents_labeled);
    all.insert(all.end(), latents_unlabeled.begin(), latents_unlabeled.end());
    const std::size_t k = std::min(n_lab + tau, all.size());
    const KMeans km = k_means(all, k, rng);

    struct Cluster {
        std::vector<std::size_t> members;    // indices into `all`
        std::vector<std::size_t> unlabeled;  // indices into `latents_unlabeled`
        bool covered = false;
    };
    std::vector<Cluster> clusters(k);
    for (std::size_t i = 0; i < all.size(); ++i) {
        Cluster& c = clusters[km.assign[i]];
        c.members.push_back(i);
        if (i < n_lab)
            c.covered = true;
        else
            c.unlabeled.push_back(i - n_lab);
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (clusters[a].covered != clusters[b].covered) return !clusters[a].covered;
        if (clusters[a].unlabeled.size() != clusters[b].unlabeled.size())
            return clusters[a].unlabeled.size() > clusters[b].unlabeled.size();
        return a < b;
    });

    // most-typical-first queue per cluster
    std::vector<std::vector<std::size_t>> queue(k);
    for (std::size_t c = 0; c < k; ++c) {
        auto& q = queue[c];
        q = clusters[c].unlabeled;
        std::vector<double> typ(q.size());
        for (std::size_t i = 0; i < q.size(); ++i)
            typ[i] = typicality(all, q[i] + n_lab, clusters[c].members);
        std::vector<std::size_t> perm(q.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
            if (typ[a] != typ[b]) return typ[a] > typ[b];
            return q[a] < q[b];
        });
        std::vector<std::size_t> sorted(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) sorted[i] = q[perm[i]];
        q = std::move(sorted);
    }

    std::vector<std::size_t> picked;
    std::vector<std::size_t> cursor(k, 0);
    bool first_pass = true;
    while (picked.size() < tau) {
        bool progress = false;
        for (std::size_t c : order) {
            if (picked.size() == tau) break;
            if (first_pass && clusters[c].covered) continue;
            if (cursor[c] < queue[c].size()) {
                picked.push_back(queue[c][cursor[c]++]);
                progress = true;
            }
        }
        if (!progress && !first_pass) break;  // nothing left anywhere
        first_pass = false;
    }
    return picked;
}

std::vector<std::size_t> random_select(std::size_t pool_size, std::size_t tau,
                                       RngStream& rng) {
    if (tau > pool_size)
        throw std::invalid_argument("random_select: tau exceeds pool size");
    std::vector<std::size_t> idx(pool_size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t t = 0; t < tau; ++t) {
        const std::size_t j = t + rng.uniform_below(pool_size - t);
        std::swap(idx[t], idx[j]);
    }
    idx.resize(tau);
    return idx;
}

}  // namespace flowal
