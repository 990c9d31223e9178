#include "cwlate/estimators.hpp"

#include <cmath>
#include <limits>

namespace cwlate {

const char* estimand_name(EstimandKind k) {
    switch (k) {
        case EstimandKind::cwlate: return "cwlate";
        case EstimandKind::average: return "average";
        case EstimandKind::counterfactual: return "counterfactual";
        case EstimandKind::welfare: return "welfare";
        case EstimandKind::custom_instrument: return "custom_instrument";
        case EstimandKind::unconditional_wald: return "unconditional_wald";
    }
    return "?";
}

namespace {

// Instrument vector b per estimand; validation mirrors the estimator
// preconditions so beta_from_deltas and wlate fail identically.
Eigen::VectorXd build_instrument(const Eigen::VectorXd& delta_y, const Eigen::VectorXd& delta_x,
                                 const Eigen::VectorXd& pi, const EstimandSpec& spec) {
    const Eigen::Index m = delta_x.size();
    Eigen::VectorXd b(m);
    switch (spec.kind) {
        case EstimandKind::cwlate:
        case EstimandKind::unconditional_wald:
            b = delta_x;
            break;
        case EstimandKind::average:
            for (Eigen::Index j = 0; j < m; ++j) {
                if (std::abs(delta_x(j)) <= spec.zero_tol) throw WeakCell(static_cast<std::size_t>(j));
                b(j) = 1.0 / delta_x(j);
            }
            break;
        case EstimandKind::counterfactual: {
            if (spec.fstar.size() != m)
                throw std::invalid_argument("counterfactual weights must have one entry per cell");
            for (Eigen::Index j = 0; j < m; ++j) {
                if (spec.fstar(j) < 0.0)
                    throw std::invalid_argument("counterfactual weights must be nonnegative");
                if (spec.fstar(j) > 0.0 && std::abs(delta_x(j)) <= spec.zero_tol)
                    throw WeakCell(static_cast<std::size_t>(j));
                if (!(pi(j) > 0.0)) throw DegenerateDenominator();
                b(j) = spec.fstar(j) > 0.0 ? spec.fstar(j) / (pi(j) * delta_x(j)) : 0.0;
            }
            break;
        }
        case EstimandKind::welfare:
            for (Eigen::Index j = 0; j < m; ++j) {
                if (delta_y(j) >= 0.0) {
                    if (std::abs(delta_x(j)) <= spec.zero_tol)
                        throw WeakCell(static_cast<std::size_t>(j));
                    b(j) = 1.0 / delta_x(j);
                } else {
                    b(j) = 0.0;
                }
            }
            break;
        case EstimandKind::custom_instrument:
            if (spec.custom_b.size() != m)
                throw std::invalid_argument("custom instrument must have one entry per cell");
            b = spec.custom_b;
            for (Eigen::Index j = 0; j < m; ++j)
                if (b(j) * delta_x(j) < 0.0) throw SignViolation(static_cast<std::size_t>(j));
            break;
    }
    return b;
}

WlateResult assemble(const Eigen::VectorXd& delta_y, const Eigen::VectorXd& delta_x,
                     const Eigen::VectorXd& pi, const EstimandSpec& spec,
                     const std::vector<std::string>& dropped) {
    const Eigen::Index m = delta_x.size();
    WlateResult r;
    r.b_used = build_instrument(delta_y, delta_x, pi, spec);
    r.tau_y = 0.0;
    r.tau_x = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        r.tau_y += pi(j) * r.b_used(j) * delta_y(j);
        r.tau_x += pi(j) * r.b_used(j) * delta_x(j);
    }
    if (spec.kind == EstimandKind::cwlate || spec.kind == EstimandKind::unconditional_wald) {
        if (!(r.tau_x > 0.0)) throw ZeroFirstStage();
    } else if (!(r.tau_x > 0.0)) {
        throw DegenerateDenominator();
    }
    r.beta_hat = r.tau_y / r.tau_x;
    r.weights.resize(m);
    r.omega.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        r.omega(j) = r.b_used(j) * delta_x(j) / r.tau_x;
        r.weights(j) = pi(j) * r.omega(j);
    }
    r.conditional_lates.resize(m);
    r.defined.assign(static_cast<std::size_t>(m), 0);
    for (Eigen::Index j = 0; j < m; ++j) {
        if (std::abs(delta_x(j)) > spec.zero_tol) {
            r.conditional_lates(j) = delta_y(j) / delta_x(j);
            r.defined[static_cast<std::size_t>(j)] = 1;
        } else {
            r.conditional_lates(j) = std::numeric_limits<double>::quiet_NaN();
        }
    }
    r.dropped = dropped;
    return r;
}

}  // namespace

double beta_from_deltas(const Eigen::VectorXd& delta_y, const Eigen::VectorXd& delta_x,
                        const Eigen::VectorXd& pi, const EstimandSpec& spec) {
    return assemble(delta_y, delta_x, pi, spec, {}).beta_hat;
}

WlateResult wlate(const CellDiscontinuities& d, const EstimandSpec& spec) {
    const Eigen::Index m = d.delta_x.size();
    Eigen::VectorXd pi(m);
    for (Eigen::Index j = 0; j < m; ++j) pi(j) = d.partition.pi_hat[static_cast<std::size_t>(j)];
    WlateResult r = assemble(d.delta_y, d.delta_x, pi, spec, d.partition.dropped);
    if (spec.kind == EstimandKind::welfare) {
        // Cells whose reduced-form jump could plausibly flip sign get flagged.
        // The rough scale uses the in-band counts from the underlying fits.
        for (Eigen::Index j = 0; j < m; ++j) {
            const double nj = static_cast<double>(d.y_plus.in_band[static_cast<std::size_t>(j)] +
                                                  d.y_minus.in_band[static_cast<std::size_t>(j)]);
            if (nj > 0.0 && std::abs(d.delta_y(j)) < 1.0 / std::sqrt(nj))
                r.flagged_cells.push_back(static_cast<std::size_t>(j));
        }
    }
    return r;
}

WlateResult cwlate(const CellDiscontinuities& d) {
    return wlate(d, EstimandSpec{EstimandKind::cwlate});
}

ConditionalLates conditional_lates(const CellDiscontinuities& d, double zero_tol) {
    ConditionalLates out;
    const Eigen::Index m = d.delta_x.size();
    out.beta.resize(m);
    out.defined.assign(static_cast<std::size_t>(m), 0);
    for (Eigen::Index j = 0; j < m; ++j) {
        if (std::abs(d.delta_x(j)) > zero_tol) {
            out.beta(j) = d.delta_y(j) / d.delta_x(j);
            out.defined[static_cast<std::size_t>(j)] = 1;
        } else {
            out.beta(j) = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

WlateResult unconditional_wald(const RddDataset& data, int p, double h,
                               const KernelSpec& kernel, std::size_t min_side_count) {
    RddDataset pooled = pooled_copy(data);
    CellPartition part = build_partition(pooled, min_side_count);
    CellDiscontinuities d = cell_discontinuities(pooled, part, p, h, kernel);
    EstimandSpec spec{EstimandKind::unconditional_wald};
    if (std::abs(d.delta_x(0)) <= spec.zero_tol) throw ZeroFirstStage();
    return wlate(d, spec);
}

GainsSign selection_on_gains_sign(double beta_cw, double beta_u, double tol) {
    const double diff = beta_cw - beta_u;
    if (std::abs(diff) <= tol) return GainsSign::zero;
    return diff > 0.0 ? GainsSign::positive : GainsSign::negative;
}

}  // namespace cwlate
