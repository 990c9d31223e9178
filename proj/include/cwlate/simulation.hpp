#pragma once

#include <cstdint>
#include <map>

#include "cwlate/bandwidth.hpp"

namespace cwlate {

enum class WSupport { binary, grid10 };
enum class McTarget { own_estimand, unconditional_late };
enum class BandwidthMode { fixed, automatic };

struct McConfig {
    double alpha_dw = 1.0;
    double beta_xw = 2.0;
    int n = 2000;
    int reps = 1000;
    std::uint64_t seed = 20260823;
    std::vector<EstimandKind> estimands{EstimandKind::cwlate, EstimandKind::unconditional_wald};
    BandwidthMode bandwidth_mode = BandwidthMode::automatic;
    double h = 0.0;  // used when fixed
    double b = 0.0;
    bool shared_bandwidth = true;       // select once (pooled Wald) and reuse
    WSupport w_support = WSupport::binary;
    bool coarsen = false;               // estimate on sign(W) instead of W
    McTarget target = McTarget::own_estimand;
    double z_sigma = 2.0;               // standard deviation of Z
    bool z_sigma_is_variance = false;   // read 2 as Var(Z) instead
    double level = 0.95;
    std::size_t min_side_count = 5;
    bool pi_within_bandwidth = true;
    KernelSpec kernel{};
    int threads = 0;                    // 0: hardware default, capped by CWLATE_THREADS
};

struct TrueEstimands {
    std::vector<double> w_support;
    std::vector<double> delta_x;  // per support point (or coarsened class)
    std::vector<double> beta;
    double beta_u = 0.0;
    double beta_cw = 0.0;
};

TrueEstimands true_estimands(double alpha_dw, double beta_xw,
                             WSupport support = WSupport::binary, bool coarsen = false);

RddDataset dgp_sample(const McConfig& cfg, std::uint64_t rep_index);

struct EstimandSummary {
    std::size_t reps_used = 0;
    std::size_t failures = 0;
    double target = 0.0;
    double mean = 0.0;
    double mean_bc = 0.0;
    double bias = 0.0;
    double bias_sq = 0.0;
    double variance = 0.0;
    double mse = 0.0;
    double coverage = 0.0;  // RBC interval coverage of the target
    double mean_h = 0.0;
    double mean_b = 0.0;
};

struct McReport {
    McConfig config;
    std::map<EstimandKind, EstimandSummary> by_estimand;
};

McReport run_monte_carlo(const McConfig& cfg);

}  // namespace cwlate
