// Times serial vs OpenMP pool scoring on a synthetic pool and verifies the
// two paths agree bitwise. Exit code 1 on any mismatch.
#include <chrono>
#include <cstdio>
#include <numeric>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "flowal/acquisition.hpp"
#include "flowal/models.hpp"
#include "flowal/tensor.hpp"

using namespace flowal;

namespace {

double run_once(const Model& model, const Tensor& X, const std::vector<std::size_t>& rows,
                const std::string& acq, const McConfig& mc, ScoreExec exec,
                std::vector<double>& out) {
    const auto t0 = std::chrono::steady_clock::now();
    out = score_pool(model, X, rows, acq, mc, RngStream(99), exec);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP: %d thread(s)\n", omp_get_max_threads());
#else
    std::printf("OpenMP: disabled at build time\n");
#endif

    ModelConfig cfg;
    cfg.family = "flow";
    cfg.feature_dim = 8;
    cfg.encoder_widths = {32, 32};
    cfg.conditioner_widths = {32};
    cfg.flow_layers = 1;
    cfg.spline_bins = 6;
    cfg.dropout_eval = 0.05;
    auto model = make_model(cfg);
    RngStream init(1);
    model->init(init);

    const std::size_t pool = 256;
    Tensor X(pool, cfg.feature_dim);
    RngStream data(2);
    for (std::size_t i = 0; i < pool; ++i)
        for (std::size_t j = 0; j < cfg.feature_dim; ++j) X.at(i, j) = data.normal();
    std::vector<std::size_t> rows(pool);
    std::iota(rows.begin(), rows.end(), std::size_t{0});

    McConfig mc;
    mc.k = 10;
    mc.m = 100;

    int mismatches = 0;
    std::printf("%-20s %12s %12s %9s\n", "acquisition", "serial (s)", "parallel (s)",
                "speedup");
    for (const char* acq : {"std", "entropy", "bald_sigma", "bald_entropy", "nflows_out",
                            "balsa_kl_grid", "balsa_kl_pair", "balsa_emd"}) {
        std::vector<double> serial, parallel;
        const double ts = run_once(*model, X, rows, acq, mc, ScoreExec::kSerial, serial);
        const double tp = run_once(*model, X, rows, acq, mc, ScoreExec::kParallel, parallel);
        const bool same = serial == parallel;
        if (!same) ++mismatches;
        std::printf("%-20s %12.3f %12.3f %8.2fx  %s\n", acq, ts, tp, ts / tp,
                    same ? "bitwise equal" : "MISMATCH");
    }
    if (mismatches > 0) {
        std::printf("%d acquisition(s) disagree between execution modes\n", mismatches);
        return 1;
    }
    std::printf("all scores bitwise identical across execution modes\n");
    return 0;
}
