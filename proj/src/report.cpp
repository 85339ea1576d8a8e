#include "flowal/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace flowal {

namespace fs = std::filesystem;

std::vector<RunRecord> scan_results_dir(const std::string& dir) {
    if (!fs::is_directory(dir))
        throw std::runtime_error("scan_results_dir: not a directory: " + dir);
    std::vector<std::string> csvs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto p = entry.path().string();
        if (p.size() > 4 && p.substr(p.size() - 4) == ".csv") csvs.push_back(p);
    }
    std::sort(csvs.begin(), csvs.end());
    if (csvs.empty()) throw std::runtime_error("scan_results_dir: no csv files in " + dir);

    std::vector<RunRecord> runs;
    for (const auto& path : csvs) {
        const std::string meta_path = path + ".meta.json";
        std::ifstream meta(meta_path);
        if (!meta)
            throw std::runtime_error("scan_results_dir: missing sidecar " + meta_path);
        nlohmann::json j;
        meta >> j;
        RunRecord r;
        r.algorithm = j.at("acquisition").at("name").get<std::string>();
        r.dataset = j.at("dataset").at("name").get<std::string>();
        if (r.dataset.empty()) r.dataset = j.at("dataset").at("kind").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.trajectory = read_trajectory_csv(path);
        runs.push_back(std::move(r));
    }
    return runs;
}

namespace {

std::string fmt(double v, const char* spec = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
                   ? c
                   : '_';
    return out;
}

constexpr const char* kPalette[] = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39"};

struct Band {
    std::vector<double> x, mean, stdev;
};

// mean +- std of a metric across seeds, keyed by labeled size
Band band_over_seeds(const std::vector<const RunRecord*>& runs,
                     const std::string& metric) {
    std::map<std::size_t, std::vector<double>> by_size;
    for (const auto* r : runs)
        for (const auto& row : r->trajectory.rows) {
            const double v = metric == "nll" ? row.nll
                             : metric == "mae" ? row.mae
                                               : row.crps;
            by_size[row.labeled_size].push_back(v);
        }
    Band b;
    for (const auto& [size, vals] : by_size) {
        double m = 0.0;
        for (double v : vals) m += v;
        m /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - m) * (v - m);
        var /= static_cast<double>(vals.size());
        b.x.push_back(static_cast<double>(size));
        b.mean.push_back(m);
        b.stdev.push_back(std::sqrt(var));
    }
    return b;
}

void write_dataset_svg(const std::string& path, const std::string& dataset,
                       const std::map<std::string, std::vector<const RunRecord*>>& by_algo) {
    const double panel_w = 360, panel_h = 260, margin = 55, gap = 30;
    const char* metrics[] = {"nll", "mae", "crps"};
    const double width = margin + 3 * panel_w + 2 * gap + 20;
    const double height = margin + panel_h + 60 + 16.0 * static_cast<double>(by_algo.size());

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("emit_report: cannot write " + path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width, "%.0f")
      << "\" height=\"" << fmt(height, "%.0f") << "\">\n";
    f << "<text x=\"" << fmt(margin, "%.0f")
      << "\" y=\"20\" font-family=\"monospace\" font-size=\"14\">" << dataset
      << "</text>\n";

    for (int p = 0; p < 3; ++p) {
        const std::string metric = metrics[p];
        const double x0 = margin + p * (panel_w + gap);
        const double y0 = 40;

        // collect bands and global extent
        std::map<std::string, Band> bands;
        double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
        for (const auto& [algo, runs] : by_algo) {
            Band b = band_over_seeds(runs, metric);
            for (std::size_t i = 0; i < b.x.size(); ++i) {
                lo_x = std::min(lo_x, b.x[i]);
                hi_x = std::max(hi_x, b.x[i]);
                lo_y = std::min(lo_y, b.mean[i] - b.stdev[i]);
                hi_y = std::max(hi_y, b.mean[i] + b.stdev[i]);
            }
            bands[algo] = std::move(b);
        }
        if (hi_x <= lo_x) hi_x = lo_x + 1.0;
        if (hi_y <= lo_y) hi_y = lo_y + 1.0;
        const double pad = 0.05 * (hi_y - lo_y);
        lo_y -= pad;
        hi_y += pad;
        auto sx = [&](double v) { return x0 + (v - lo_x) / (hi_x - lo_x) * panel_w; };
        auto sy = [&](double v) {
            return y0 + panel_h - (v - lo_y) / (hi_y - lo_y) * panel_h;
        };

        f << "<rect x=\"" << fmt(x0, "%.1f") << "\" y=\"" << fmt(y0, "%.1f")
          << "\" width=\"" << fmt(panel_w, "%.1f") << "\" height=\""
          << fmt(panel_h, "%.1f") << "\" fill=\"none\" stroke=\"#999\"/>\n";
        f << "<text x=\"" << fmt(x0 + panel_w / 2 - 15, "%.1f") << "\" y=\""
          << fmt(y0 + panel_h + 32, "%.1f")
          << "\" font-family=\"monospace\" font-size=\"12\">" << metric << "</text>\n";
        f << "<text x=\"" << fmt(x0, "%.1f") << "\" y=\"" << fmt(y0 + panel_h + 16, "%.1f")
          << "\" font-family=\"monospace\" font-size=\"10\">" << fmt(lo_x, "%.6g")
          << "</text>\n";
        f << "<text x=\"" << fmt(x0 + panel_w - 30, "%.1f") << "\" y=\""
          << fmt(y0 + panel_h + 16, "%.1f")
          << "\" font-family=\"monospace\" font-size=\"10\">" << fmt(hi_x, "%.6g")
          << "</text>\n";
        f << "<text x=\"" << fmt(x0 + 4, "%.1f") << "\" y=\"" << fmt(y0 + 12, "%.1f")
          << "\" font-family=\"monospace\" font-size=\"10\">" << fmt(hi_y, "%.6g")
          << "</text>\n";
        f << "<text x=\"" << fmt(x0 + 4, "%.1f") << "\" y=\"" << fmt(y0 + panel_h - 4, "%.1f")
          << "\" font-family=\"monospace\" font-size=\"10\">" << fmt(lo_y, "%.6g")
          << "</text>\n";

        std::size_t color = 0;
        for (const auto& [algo, band] : bands) {
            const char* stroke = kPalette[color % 14];
            ++color;
            if (band.x.empty()) continue;
            // +-1 std band
            f << "<polygon fill=\"" << stroke << "\" opacity=\"0.15\" points=\"";
            for (std::size_t i = 0; i < band.x.size(); ++i)
                f << fmt(sx(band.x[i]), "%.2f") << ","
                  << fmt(sy(band.mean[i] + band.stdev[i]), "%.2f") << " ";
            for (std::size_t i = band.x.size(); i-- > 0;)
                f << fmt(sx(band.x[i]), "%.2f") << ","
                  << fmt(sy(band.mean[i] - band.stdev[i]), "%.2f") << " ";
            f << "\"/>\n";
            // mean curve: one path per algorithm per panel
            f << "<path fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" d=\"";
            for (std::size_t i = 0; i < band.x.size(); ++i)
                f << (i == 0 ? "M" : "L") << fmt(sx(band.x[i]), "%.2f") << " "
                  << fmt(sy(band.mean[i]), "%.2f");
            f << "\"/>\n";
        }
    }

    // legend
    std::size_t color = 0, line = 0;
    for (const auto& [algo, runs] : by_algo) {
        const double ly = 40 + panel_h + 50 + 16.0 * static_cast<double>(line++);
        f << "<rect x=\"" << fmt(margin, "%.1f") << "\" y=\"" << fmt(ly - 9, "%.1f")
          << "\" width=\"18\" height=\"4\" fill=\"" << kPalette[color % 14] << "\"/>\n";
        f << "<text x=\"" << fmt(margin + 24, "%.1f") << "\" y=\"" << fmt(ly, "%.1f")
          << "\" font-family=\"monospace\" font-size=\"11\">" << algo << " ("
          << runs.size() << " seeds)</text>\n";
        ++color;
    }
    f << "</svg>\n";
}

}  // namespace

void emit_report(const std::vector<RunRecord>& runs, const std::string& out_dir,
                 const std::string& metric, double alpha) {
    if (runs.empty()) throw std::invalid_argument("emit_report: no runs");
    fs::create_directories(out_dir);

    std::vector<AucRecord> aucs;
    for (const auto& r : runs)
        aucs.push_back({r.algorithm, r.dataset, r.seed, auc(r.trajectory, metric)});
    const RankTable table = rank_algorithms(aucs);

    {
        std::ofstream f(out_dir + "/ranks.csv", std::ios::binary);
        if (!f) throw std::runtime_error("emit_report: cannot write ranks.csv");
        f << "algorithm,dataset,seed,auc,rank\n";
        for (const auto& row : table.rows)
            f << row.algorithm << "," << row.dataset << "," << row.seed << ","
              << fmt(row.auc) << "," << fmt(row.rank) << "\n";
    }

    {
        // mean ranks, best (lowest) first; name breaks ties
        std::vector<std::pair<std::string, double>> means(table.mean_rank.begin(),
                                                          table.mean_rank.end());
        std::sort(means.begin(), means.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second < b.second;
            return a.first < b.first;
        });
        std::ofstream f(out_dir + "/summary.md", std::ios::binary);
        if (!f) throw std::runtime_error("emit_report: cannot write summary.md");
        f << "# Active-learning benchmark summary\n\n";
        f << "Ranking metric: " << metric << "-AUC (lower is better, rank 1 = best)\n\n";
        f << "| algorithm | mean rank |\n|---|---|\n";
        for (const auto& [algo, mean] : means)
            f << "| " << algo << " | " << fmt(mean, "%.4f") << " |\n";
    }

    {
        // paired ranks per (dataset, seed) group for every algorithm pair
        std::vector<std::string> algorithms;
        for (const auto& [algo, mean] : table.mean_rank) algorithms.push_back(algo);
        std::sort(algorithms.begin(), algorithms.end());

        std::map<std::pair<std::string, std::uint64_t>, std::map<std::string, double>>
            group_rank;
        for (const auto& row : table.rows)
            group_rank[{row.dataset, row.seed}][row.algorithm] = row.rank;

        struct Pair {
            std::string a, b;
            double p;
        };
        std::vector<Pair> pairs;
        for (std::size_t i = 0; i < algorithms.size(); ++i)
            for (std::size_t j = i + 1; j < algorithms.size(); ++j) {
                std::vector<double> ra, rb;
                for (const auto& [key, ranks] : group_rank) {
                    ra.push_back(ranks.at(algorithms[i]));
                    rb.push_back(ranks.at(algorithms[j]));
                }
                pairs.push_back(
                    {algorithms[i], algorithms[j], wilcoxon_signed_rank(ra, rb).p_value});
            }

        std::ofstream f(out_dir + "/pairwise.csv", std::ios::binary);
        if (!f) throw std::runtime_error("emit_report: cannot write pairwise.csv");
        f << "algorithm_a,algorithm_b,p_value,holm_reject\n";
        if (!pairs.empty()) {
            std::vector<double> ps;
            for (const auto& p : pairs) ps.push_back(p.p);
            const auto decisions = holm_reject(ps, alpha);
            for (std::size_t i = 0; i < pairs.size(); ++i)
                f << pairs[i].a << "," << pairs[i].b << "," << fmt(pairs[i].p) << ","
                  << (decisions[i] ? "1" : "0") << "\n";
        }
    }

    std::map<std::string, std::map<std::string, std::vector<const RunRecord*>>> datasets;
    for (const auto& r : runs) datasets[r.dataset][r.algorithm].push_back(&r);
    for (const auto& [dataset, by_algo] : datasets)
        write_dataset_svg(out_dir + "/plot_" + sanitize(dataset) + ".svg", dataset,
                          by_algo);
}

}  // namespace flowal
