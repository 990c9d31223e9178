#include "cwlate/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <thread>

#include "cwlate/stats.hpp"

namespace cwlate {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<double> support_points(WSupport s) {
    if (s == WSupport::binary) return {-1.0, 1.0};
    std::vector<double> g;
    for (int k = -5; k <= 5; ++k) {
        if (k == 0) continue;
        g.push_back(static_cast<double>(k) / 3.0);
    }
    std::sort(g.begin(), g.end());
    return g;
}

std::string cell_label(double w, bool coarsen) {
    if (coarsen) return w < 0.0 ? "neg" : "pos";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "w%+05.2f", w);
    return buf;
}

}  // namespace

TrueEstimands true_estimands(double alpha_dw, double beta_xw, WSupport support, bool coarsen) {
    const std::vector<double> grid = support_points(support);
    std::vector<double> dx(grid.size()), bw(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        dx[j] = norm_cdf(0.2 + alpha_dw * grid[j]) - norm_cdf(-1.0);
        bw[j] = 2.0 + beta_xw * grid[j];
    }

    TrueEstimands t;
    if (coarsen) {
        // Coarsened classes average the underlying points uniformly; the class
        // effect is the complier-weighted ratio of the averaged jumps.
        t.w_support = {-1.0, 1.0};
        t.delta_x.assign(2, 0.0);
        std::vector<double> dy(2, 0.0);
        std::vector<std::size_t> cnt(2, 0);
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const std::size_t cls = grid[j] < 0.0 ? 0 : 1;
            t.delta_x[cls] += dx[j];
            dy[cls] += bw[j] * dx[j];
            ++cnt[cls];
        }
        t.beta.assign(2, 0.0);
        for (std::size_t cls = 0; cls < 2; ++cls) {
            t.delta_x[cls] /= static_cast<double>(cnt[cls]);
            dy[cls] /= static_cast<double>(cnt[cls]);
            t.beta[cls] = dy[cls] / t.delta_x[cls];
        }
    } else {
        t.w_support = grid;
        t.delta_x = dx;
        t.beta = bw;
    }

    double num_u = 0.0, den_u = 0.0, num_cw = 0.0, den_cw = 0.0;
    for (std::size_t j = 0; j < t.w_support.size(); ++j) {
        const double d = t.delta_x[j];
        num_u += d * t.beta[j];
        den_u += d;
        num_cw += d * d * t.beta[j];
        den_cw += d * d;
    }
    t.beta_u = num_u / den_u;
    t.beta_cw = num_cw / den_cw;
    return t;
}

RddDataset dgp_sample(const McConfig& cfg, std::uint64_t rep_index) {
    std::mt19937_64 gen(splitmix64(cfg.seed ^ splitmix64(rep_index + 1)));
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> widx(0, support_points(cfg.w_support).size() - 1);
    const std::vector<double> grid = support_points(cfg.w_support);
    const double z_sd = cfg.z_sigma_is_variance ? std::sqrt(cfg.z_sigma) : cfg.z_sigma;

    RddDataset data;
    data.y.resize(cfg.n);
    data.x.resize(cfg.n);
    data.z.resize(cfg.n);
    data.cell.resize(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        const double z = z_sd * stdnorm(gen);
        const double w = grid[widx(gen)];
        const double ux = stdnorm(gen);
        const double uy = 0.5 * ux + std::sqrt(2.0 - 0.25) * stdnorm(gen);
        const double d = z >= 0.0 ? 1.0 : 0.0;
        const double x =
            (-1.0 + 0.2 * z + 0.1 * d * z + 1.2 * d + cfg.alpha_dw * d * w + ux > 0.0) ? 1.0 : 0.0;
        const double y = 1.0 + 2.0 * x + 0.3 * z - 0.1 * x * z + cfg.beta_xw * x * w + uy;
        data.y[i] = y;
        data.x[i] = x;
        data.z[i] = z;
        data.cell[i] = cell_label(w, cfg.coarsen);
    }
    return data;
}

namespace {

struct RepOutcome {
    bool ok = false;
    double est = 0.0;
    double est_bc = 0.0;
    bool covered = false;
    double h = 0.0;
    double b = 0.0;
};

int resolve_threads(int requested) {
    int t = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (t < 1) t = 1;
    if (const char* env = std::getenv("CWLATE_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) t = std::min(t, cap);
    }
    return t;
}

}  // namespace

McReport run_monte_carlo(const McConfig& cfg) {
    if (cfg.n < 50) throw std::invalid_argument("simulation needs n >= 50");
    if (cfg.reps < 1) throw std::invalid_argument("simulation needs reps >= 1");

    TrueEstimands truth =
        true_estimands(cfg.alpha_dw, cfg.beta_xw, cfg.w_support, cfg.coarsen);
    Eigen::VectorXd true_dx(static_cast<Eigen::Index>(truth.delta_x.size()));
    Eigen::VectorXd true_dy(true_dx.size());
    Eigen::VectorXd true_pi(true_dx.size());
    for (Eigen::Index j = 0; j < true_dx.size(); ++j) {
        true_dx(j) = truth.delta_x[static_cast<std::size_t>(j)];
        true_dy(j) = truth.beta[static_cast<std::size_t>(j)] * true_dx(j);
        true_pi(j) = 1.0 / static_cast<double>(true_dx.size());
    }

    const std::size_t ne = cfg.estimands.size();
    std::vector<double> targets(ne);
    for (std::size_t e = 0; e < ne; ++e) {
        if (cfg.target == McTarget::unconditional_late) {
            targets[e] = truth.beta_u;
        } else if (cfg.estimands[e] == EstimandKind::unconditional_wald) {
            targets[e] = truth.beta_u;
        } else {
            targets[e] = beta_from_deltas(true_dy, true_dx, true_pi,
                                          EstimandSpec{cfg.estimands[e]});
        }
    }

    std::vector<std::vector<RepOutcome>> results(
        static_cast<std::size_t>(cfg.reps), std::vector<RepOutcome>(ne));

    auto run_rep = [&](int r) {
        RddDataset data = dgp_sample(cfg, static_cast<std::uint64_t>(r));
        RddDataset pooled = pooled_copy(data);
        CellPartition pooled_part;
        CellPartition cell_part;
        bool have_cells = true;
        try {
            pooled_part = build_partition(pooled, cfg.min_side_count);
        } catch (const std::exception&) {
            return;  // no usable sample at all
        }
        try {
            cell_part = build_partition(data, cfg.min_side_count);
        } catch (const std::exception&) {
            have_cells = false;
        }

        double h = cfg.h, b = cfg.b;
        if (cfg.bandwidth_mode == BandwidthMode::automatic && cfg.shared_bandwidth) {
            try {
                BandwidthReport rep = select_bandwidths(
                    pooled, pooled_part, EstimandSpec{EstimandKind::unconditional_wald},
                    cfg.kernel, cfg.min_side_count);
                h = rep.h_n;
                b = rep.b_n;
            } catch (const std::exception&) {
                return;
            }
        }

        for (std::size_t e = 0; e < ne; ++e) {
            RepOutcome& out = results[static_cast<std::size_t>(r)][e];
            const EstimandKind kind = cfg.estimands[e];
            const bool pooled_run = kind == EstimandKind::unconditional_wald;
            if (!pooled_run && !have_cells) continue;
            try {
                if (cfg.bandwidth_mode == BandwidthMode::automatic && !cfg.shared_bandwidth) {
                    BandwidthReport rep = select_bandwidths(
                        pooled_run ? pooled : data, pooled_run ? pooled_part : cell_part,
                        EstimandSpec{kind}, cfg.kernel, cfg.min_side_count);
                    h = rep.h_n;
                    b = rep.b_n;
                }
                EstimateOptions opts;
                opts.level = cfg.level;
                opts.pi_within_bandwidth = cfg.pi_within_bandwidth;
                RbcEstimate est = rbc_estimate(pooled_run ? pooled : data,
                                               pooled_run ? pooled_part : cell_part,
                                               EstimandSpec{kind}, h, b, cfg.kernel, opts);
                out.ok = true;
                out.est = est.beta_hat;
                out.est_bc = est.beta_bc;
                out.covered = targets[e] >= est.ci.first && targets[e] <= est.ci.second;
                out.h = h;
                out.b = b;
            } catch (const std::exception&) {
                // counted as a failure below
            }
        }
    };

    const int nthreads = resolve_threads(cfg.threads);
    if (nthreads <= 1 || cfg.reps == 1) {
        for (int r = 0; r < cfg.reps; ++r) run_rep(r);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (int r = next.fetch_add(1); r < cfg.reps; r = next.fetch_add(1)) run_rep(r);
            });
        for (auto& th : pool) th.join();
    }

    McReport report;
    report.config = cfg;
    for (std::size_t e = 0; e < ne; ++e) {
        EstimandSummary s;
        s.target = targets[e];
        double sum = 0.0, sumsq = 0.0, sum_bc = 0.0, sum_h = 0.0, sum_b = 0.0;
        std::size_t used = 0, covered = 0;
        for (int r = 0; r < cfg.reps; ++r) {
            const RepOutcome& o = results[static_cast<std::size_t>(r)][e];
            if (!o.ok) continue;
            ++used;
            sum += o.est;
            sumsq += o.est * o.est;
            sum_bc += o.est_bc;
            sum_h += o.h;
            sum_b += o.b;
            if (o.covered) ++covered;
        }
        s.reps_used = used;
        s.failures = static_cast<std::size_t>(cfg.reps) - used;
        if (used > 0) {
            const double n = static_cast<double>(used);
            s.mean = sum / n;
            s.mean_bc = sum_bc / n;
            s.mean_h = sum_h / n;
            s.mean_b = sum_b / n;
            s.bias = s.mean - s.target;
            s.bias_sq = s.bias * s.bias;
            s.mse = sumsq / n - 2.0 * s.target * s.mean + s.target * s.target;
            s.variance = s.mse - s.bias_sq;
            s.coverage = static_cast<double>(covered) / n;
        }
        report.by_estimand[cfg.estimands[e]] = s;
    }
    return report;
}

}  // namespace cwlate
