#include "flowal/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace flowal {

namespace {

// RFC-4180 field scanner over the whole file contents. Returns rows of raw
// string fields; quoted fields may contain commas, newlines and "" escapes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    while (i < n) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            // swallow; row ends on the \n that follows (or bare \r)
            if (i + 1 >= n || text[i + 1] != '\n') end_row();
        } else if (c == '\n') {
            end_row();
        } else {
            field += c;
        }
        ++i;
    }
    if (in_quotes) throw std::runtime_error("csv: unterminated quoted field");
    if (!field.empty() || !row.empty()) end_row();
    return rows;
}

bool is_missing(const std::string& s) {
    if (s.empty()) return true;
    std::string low;
    for (char c : s) low += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return low == "na" || low == "nan" || low == "null" || low == "?";
}

bool parse_number(const std::string& s, double& out) {
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end != '\0') {
        if (!std::isspace(static_cast<unsigned char>(*end))) return false;
        ++end;
    }
    return std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& target_column) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_csv: cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    auto rows = parse_csv(buf.str());
    if (rows.size() < 2) throw std::runtime_error("load_csv: no data rows in " + path);

    const std::vector<std::string> header = rows.front();
    const std::size_t ncols = header.size();
    std::size_t target = ncols - 1;
    if (!target_column.empty()) {
        const auto it = std::find(header.begin(), header.end(), target_column);
        if (it == header.end())
            throw std::runtime_error("load_csv: no column named '" + target_column + "'");
        target = static_cast<std::size_t>(it - header.begin());
    }

    // keep rows with the right arity and no missing fields
    std::vector<const std::vector<std::string>*> kept;
    std::size_t dropped = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != ncols)
            throw std::runtime_error("load_csv: row " + std::to_string(r + 1) + " has " +
                                     std::to_string(rows[r].size()) + " fields, expected " +
                                     std::to_string(ncols));
        bool ok = true;
        for (const auto& s : rows[r])
            if (is_missing(s)) ok = false;
        if (ok)
            kept.push_back(&rows[r]);
        else
            ++dropped;
    }
    if (kept.empty()) throw std::runtime_error("load_csv: zero usable rows in " + path);

    // column typing: numeric iff every kept value parses as a finite double
    std::vector<bool> numeric(ncols, true);
    for (std::size_t c = 0; c < ncols; ++c)
        for (const auto* row : kept) {
            double v;
            if (!parse_number((*row)[c], v)) {
                numeric[c] = false;
                break;
            }
        }
    if (!numeric[target])
        throw std::runtime_error("load_csv: target column '" + header[target] +
                                 "' is not numeric");

    // alphabetical category lists for one-hot columns
    std::vector<std::vector<std::string>> categories(ncols);
    for (std::size_t c = 0; c < ncols; ++c) {
        if (numeric[c] || c == target) continue;
        std::set<std::string> uniq;
        for (const auto* row : kept) uniq.insert((*row)[c]);
        categories[c].assign(uniq.begin(), uniq.end());
    }

    Dataset d;
    d.name = path;
    d.dropped_rows = dropped;
    for (std::size_t c = 0; c < ncols; ++c) {
        if (c == target) continue;
        if (numeric[c]) {
            d.feature_names.push_back(header[c]);
        } else {
            for (const auto& cat : categories[c])
                d.feature_names.push_back(header[c] + "=" + cat);
        }
    }
    d.X = Tensor(kept.size(), d.feature_names.size());
    d.y.resize(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        const auto& row = *kept[r];
        std::size_t out = 0;
        for (std::size_t c = 0; c < ncols; ++c) {
            if (c == target) continue;
            if (numeric[c]) {
                double v;
                parse_number(row[c], v);
                d.X.at(r, out++) = v;
            } else {
                for (const auto& cat : categories[c])
                    d.X.at(r, out++) = (row[c] == cat) ? 1.0 : 0.0;
            }
        }
        parse_number(row[target], d.y[r]);
    }
    return d;
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
    if (s == "heteroscedastic") return SyntheticKind::kHeteroscedastic;
    if (s == "bimodal") return SyntheticKind::kBimodal;
    if (s == "linear") return SyntheticKind::kLinear;
    throw std::invalid_argument("unknown synthetic kind: " + s);
}

Dataset make_synthetic(SyntheticKind kind, std::size_t n, double noise, RngStream& rng) {
    if (n < 10) throw std::invalid_argument("make_synthetic: n must be >= 10");
    Dataset d;
    d.X = Tensor(n, 1);
    d.y.resize(n);
    d.feature_names = {"x"};
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform();
        d.X.at(i, 0) = x;
        switch (kind) {
            case SyntheticKind::kHeteroscedastic: {
                const double sigma = 0.01 + 0.29 * x;
                d.y[i] = std::sin(4.0 * std::numbers::pi * x) +
                         noise * sigma * rng.normal();
                d.name = "synthetic-heteroscedastic";
                break;
            }
            case SyntheticKind::kBimodal: {
                const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
                d.y[i] = 0.5 + sign * 0.4 * x + noise * 0.05 * rng.normal();
                d.name = "synthetic-bimodal";
                break;
            }
            case SyntheticKind::kLinear:
                d.y[i] = 0.2 + 0.6 * x + noise * 0.02 * rng.normal();
                d.name = "synthetic-linear";
                break;
        }
    }
    return d;
}

SplitIndices split_dataset(std::size_t n, double f_train, double f_val, double f_test,
                           std::uint64_t split_seed) {
    if (std::fabs(f_train + f_val + f_test - 1.0) > 1e-9)
        throw std::invalid_argument("split_dataset: fractions must sum to 1");
    if (f_train < 0 || f_val < 0 || f_test < 0)
        throw std::invalid_argument("split_dataset: negative fraction");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    RngStream rng = RngStream(split_seed).fork(kTagSplit);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_below(i);
        std::swap(order[i - 1], order[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::floor(f_train * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(f_val * static_cast<double>(n)));
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return s;
}

void Normalization::apply_features(std::vector<double>& row) const {
    if (row.size() != mean.size())
        throw std::invalid_argument("normalization: feature count mismatch");
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / std[j];
}

double Normalization::normalize_target(double y) const {
    return (y - y_lo) / (y_hi - y_lo);
}

double Normalization::denormalize_target(double z) const {
    return y_lo + z * (y_hi - y_lo);
}

Normalization fit_normalization(const Dataset& d, const std::vector<std::size_t>& train_idx) {
    if (train_idx.empty()) throw std::invalid_argument("fit_normalization: empty train split");
    const std::size_t f = d.features();
    Normalization norm;
    norm.mean.assign(f, 0.0);
    norm.std.assign(f, 0.0);
    const double n = static_cast<double>(train_idx.size());
    for (std::size_t i : train_idx)
        for (std::size_t j = 0; j < f; ++j) norm.mean[j] += d.X.at(i, j);
    for (double& m : norm.mean) m /= n;
    for (std::size_t i : train_idx)
        for (std::size_t j = 0; j < f; ++j) {
            const double c = d.X.at(i, j) - norm.mean[j];
            norm.std[j] += c * c;
        }
    for (double& s : norm.std) s = std::max(std::sqrt(s / n), 1e-12);

    norm.y_lo = d.y[train_idx[0]];
    norm.y_hi = d.y[train_idx[0]];
    for (std::size_t i : train_idx) {
        norm.y_lo = std::min(norm.y_lo, d.y[i]);
        norm.y_hi = std::max(norm.y_hi, d.y[i]);
    }
    if (norm.y_hi - norm.y_lo < 1e-12)
        throw std::runtime_error("fit_normalization: constant targets on train split");
    return norm;
}

void gather_normalized(const Dataset& d, const Normalization& norm,
                       const std::vector<std::size_t>& idx, bool clip_targets,
                       Tensor& X_out, Tensor& Y_out) {
    const std::size_t f = d.features();
    X_out = Tensor(idx.size(), f);
    Y_out = Tensor(idx.size(), 1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t j = 0; j < f; ++j)
            X_out.at(r, j) = (d.X.at(idx[r], j) - norm.mean[j]) / norm.std[j];
        double t = norm.normalize_target(d.y[idx[r]]);
        if (clip_targets) t = std::clamp(t, 0.0, 1.0);
        Y_out.at(r, 0) = t;
    }
}

std::uint64_t dataset_fingerprint(const Dataset& d) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_bytes = [&h](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    mix_bytes(d.X.data.data(), d.X.data.size() * sizeof(double));
    mix_bytes(d.y.data(), d.y.size() * sizeof(double));
    for (const auto& name : d.feature_names) mix_bytes(name.data(), name.size());
    return h;
}

std::map<std::string, ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_manifest: cannot open " + path);
    nlohmann::json j;
    f >> j;
    std::map<std::string, ManifestEntry> out;
    for (const auto& [name, entry] : j.at("datasets").items())
        out[name] = ManifestEntry{entry.at("path").get<std::string>(),
                                  entry.value("target", std::string{})};
    return out;
}

}  // namespace flowal
