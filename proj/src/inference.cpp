#include "cwlate/inference.hpp"

#include <cmath>

#include "cwlate/stats.hpp"

namespace cwlate {

namespace {

Eigen::VectorXd pi_vector(const CellPartition& part) {
    Eigen::VectorXd pi(static_cast<Eigen::Index>(part.m()));
    for (std::size_t j = 0; j < part.m(); ++j) pi(static_cast<Eigen::Index>(j)) = part.pi_hat[j];
    return pi;
}

}  // namespace

LinearizationCoeffs linearization_coeffs(const CellDiscontinuities& d,
                                         const EstimandSpec& spec, double beta_hat) {
    const Eigen::Index m = d.delta_x.size();
    const Eigen::VectorXd pi = pi_vector(d.partition);
    const Eigen::VectorXd& dx = d.delta_x;
    const Eigen::VectorXd& dy = d.delta_y;

    Eigen::VectorXd c(m);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
    switch (spec.kind) {
        case EstimandKind::cwlate:
        case EstimandKind::unconditional_wald:
            for (Eigen::Index j = 0; j < m; ++j) {
                c(j) = pi(j) * dx(j);
                g(j, j) = pi(j);
            }
            break;
        case EstimandKind::average:
            for (Eigen::Index j = 0; j < m; ++j) {
                if (std::abs(dx(j)) <= spec.zero_tol) throw WeakCell(static_cast<std::size_t>(j));
                c(j) = pi(j) / dx(j);
                g(j, j) = -pi(j) / (dx(j) * dx(j));
            }
            break;
        case EstimandKind::counterfactual:
            if (spec.fstar.size() != m)
                throw std::invalid_argument("counterfactual weights must have one entry per cell");
            for (Eigen::Index j = 0; j < m; ++j) {
                if (spec.fstar(j) > 0.0 && std::abs(dx(j)) <= spec.zero_tol)
                    throw WeakCell(static_cast<std::size_t>(j));
                c(j) = spec.fstar(j) > 0.0 ? spec.fstar(j) / dx(j) : 0.0;
                g(j, j) = spec.fstar(j) > 0.0 ? -spec.fstar(j) / (dx(j) * dx(j)) : 0.0;
            }
            break;
        case EstimandKind::welfare:
            // The kept-cell indicator is treated as locally constant.
            for (Eigen::Index j = 0; j < m; ++j) {
                if (dy(j) >= 0.0) {
                    if (std::abs(dx(j)) <= spec.zero_tol)
                        throw WeakCell(static_cast<std::size_t>(j));
                    c(j) = pi(j) / dx(j);
                    g(j, j) = -pi(j) / (dx(j) * dx(j));
                } else {
                    c(j) = 0.0;
                }
            }
            break;
        case EstimandKind::custom_instrument:
            if (spec.custom_b.size() != m)
                throw std::invalid_argument("custom instrument must have one entry per cell");
            for (Eigen::Index j = 0; j < m; ++j) c(j) = pi(j) * spec.custom_b(j);
            break;
    }

    LinearizationCoeffs out;
    out.c = c;
    out.g_delta = g;
    out.tau_x = c.dot(dx);
    out.beta_hat = beta_hat;
    if (out.tau_x == 0.0) throw ZeroFirstStage();
    out.c1 = c / out.tau_x;
    out.c2 = (g.transpose() * dy - beta_hat * (c + g.transpose() * dx)) / out.tau_x;
    return out;
}

// Builds the order-(1,2) sandwich pieces on one side from plug-in residuals of
// the order-1 fits at h.
VarianceBlocks variance_blocks(const RddDataset& data, const CellPartition& part,
                               const CellDiscontinuities& base, double h, double b,
                               Side side, const KernelSpec& kernel) {
    const std::size_t m = part.m();
    const double n = static_cast<double>(part.n_retained);
    const SideFit& fy = side == Side::plus ? base.y_plus : base.y_minus;
    const SideFit& fx = side == Side::plus ? base.x_plus : base.x_minus;
    std::vector<double> ry = side_residuals(data, part, Var::Y, fy);
    std::vector<double> rx = side_residuals(data, part, Var::X, fx);

    VarianceBlocks s;
    for (double v : ry)
        if (std::abs(v) > 1e-12) { s.exact_fit = false; break; }
    if (s.exact_fit)
        for (double v : rx)
            if (std::abs(v) > 1e-12) { s.exact_fit = false; break; }

    MomentMatrices mom = moment_matrices(data, part, 1, 2, h, b, kernel);
    BiasConstants bc = bias_constants(mom, 0);
    s.bconst = side == Side::plus ? bc.b_plus : bc.b_minus;

    Eigen::MatrixXd psi11_yy = residual_psi(data, part, ry, ry, 1, 1, h, h, side, kernel);
    Eigen::MatrixXd psi11_yx = residual_psi(data, part, ry, rx, 1, 1, h, h, side, kernel);
    Eigen::MatrixXd psi11_xx = residual_psi(data, part, rx, rx, 1, 1, h, h, side, kernel);
    Eigen::MatrixXd psi12_yy = residual_psi(data, part, ry, ry, 1, 2, h, b, side, kernel);
    Eigen::MatrixXd psi12_yx = residual_psi(data, part, ry, rx, 1, 2, h, b, side, kernel);
    Eigen::MatrixXd psi12_xx = residual_psi(data, part, rx, rx, 1, 2, h, b, side, kernel);
    Eigen::MatrixXd psi22_yy = residual_psi(data, part, ry, ry, 2, 2, b, b, side, kernel);
    Eigen::MatrixXd psi22_yx = residual_psi(data, part, ry, rx, 2, 2, b, b, side, kernel);
    Eigen::MatrixXd psi22_xx = residual_psi(data, part, rx, rx, 2, 2, b, b, side, kernel);

    const Eigen::MatrixXd& g1 = side == Side::plus ? mom.gamma_plus : mom.gamma_minus;
    const Eigen::MatrixXd& g2 = side == Side::plus ? mom.gammaq_plus : mom.gammaq_minus;

    auto resize_all = [&](auto&... v) { (v.resize(static_cast<Eigen::Index>(m)), ...); };
    resize_all(s.cov00_yy, s.cov00_yx, s.cov00_xx, s.cov0d_yy, s.cov0d_yx, s.cov0d_xx,
               s.covdd_yy, s.covdd_yx, s.covdd_xx);

    const double b2 = b * b;
    for (std::size_t j = 0; j < m; ++j) {
        Eigen::MatrixXd g1j = cell_block(g1, m, j, 2, 2);
        Eigen::MatrixXd g2j = cell_block(g2, m, j, 3, 3);
        Eigen::FullPivLU<Eigen::MatrixXd> lu1(g1j);
        Eigen::FullPivLU<Eigen::MatrixXd> lu2(g2j);
        if (!lu1.isInvertible() || !lu2.isInvertible()) throw SingularGamma(side_name(side));
        Eigen::MatrixXd g1inv = lu1.inverse();
        Eigen::MatrixXd g2inv = lu2.inverse();

        auto sandwich00 = [&](const Eigen::MatrixXd& psi) {
            Eigen::MatrixXd pj = cell_block(psi, m, j, 2, 2);
            return (g1inv * pj * g1inv)(0, 0) / n;
        };
        auto sandwich0d = [&](const Eigen::MatrixXd& psi) {
            Eigen::MatrixXd pj = cell_block(psi, m, j, 2, 3);
            return (g1inv * pj * g2inv)(0, 2) / (n * b2);
        };
        auto sandwichdd = [&](const Eigen::MatrixXd& psi) {
            Eigen::MatrixXd pj = cell_block(psi, m, j, 3, 3);
            return (g2inv * pj * g2inv)(2, 2) / (n * b2 * b2);
        };
        const Eigen::Index ej = static_cast<Eigen::Index>(j);
        s.cov00_yy(ej) = sandwich00(psi11_yy);
        s.cov00_yx(ej) = sandwich00(psi11_yx);
        s.cov00_xx(ej) = sandwich00(psi11_xx);
        s.cov0d_yy(ej) = sandwich0d(psi12_yy);
        s.cov0d_yx(ej) = sandwich0d(psi12_yx);
        s.cov0d_xx(ej) = sandwich0d(psi12_xx);
        s.covdd_yy(ej) = sandwichdd(psi22_yy);
        s.covdd_yx(ej) = sandwichdd(psi22_yx);
        s.covdd_xx(ej) = sandwichdd(psi22_xx);
    }
    return s;
}

double bias_estimate(const RddDataset& data, const CellPartition& part,
                     const LinearizationCoeffs& coeffs, double h, double b,
                     const KernelSpec& kernel) {
    MomentMatrices mom = moment_matrices(data, part, 1, 2, h, b, kernel);
    BiasConstants bc = bias_constants(mom, 0);

    SideFit yp2 = fit_side(data, part, Var::Y, Side::plus, 2, b, kernel);
    SideFit ym2 = fit_side(data, part, Var::Y, Side::minus, 2, b, kernel);
    SideFit xp2 = fit_side(data, part, Var::X, Side::plus, 2, b, kernel);
    SideFit xm2 = fit_side(data, part, Var::X, Side::minus, 2, b, kernel);

    Eigen::VectorXd by = 0.5 * (yp2.derivative(2).cwiseProduct(bc.b_plus) -
                                ym2.derivative(2).cwiseProduct(bc.b_minus));
    Eigen::VectorXd bx = 0.5 * (xp2.derivative(2).cwiseProduct(bc.b_plus) -
                                xm2.derivative(2).cwiseProduct(bc.b_minus));
    return coeffs.c1.dot(by) + coeffs.c2.dot(bx);
}

VariancePair rbc_variance(const RddDataset& data, const CellPartition& part,
                          const LinearizationCoeffs& coeffs, double h, double b,
                          const KernelSpec& kernel) {
    CellDiscontinuities base = cell_discontinuities(data, part, 1, h, kernel);
    VarianceBlocks sp = variance_blocks(data, part, base, h, b, Side::plus, kernel);
    VarianceBlocks sm = variance_blocks(data, part, base, h, b, Side::minus, kernel);

    const Eigen::VectorXd& c1 = coeffs.c1;
    const Eigen::VectorXd& c2 = coeffs.c2;

    double var_conv = 0.0, cross = 0.0, vtail = 0.0;
    for (const VarianceBlocks* s : {&sp, &sm}) {
        // The per-side bias term is (bconst/2) * mu'' = (bconst/2) * 2 theta_2/b^2,
        // so theta_2/b^2 enters the debiased statistic scaled by bconst itself.
        const Eigen::VectorXd dscale = s->bconst;
        for (Eigen::Index j = 0; j < c1.size(); ++j) {
            const double a = c1(j), cc = c2(j);
            var_conv += a * a * s->cov00_yy(j) + 2.0 * a * cc * s->cov00_yx(j) +
                        cc * cc * s->cov00_xx(j);
            cross += (a * a * s->cov0d_yy(j) + 2.0 * a * cc * s->cov0d_yx(j) +
                      cc * cc * s->cov0d_xx(j)) * dscale(j);
            vtail += (a * a * s->covdd_yy(j) + 2.0 * a * cc * s->covdd_yx(j) +
                      cc * cc * s->covdd_xx(j)) * dscale(j) * dscale(j);
        }
    }
    // Variance of the debiased estimate beta_hat - h^2 * bias_hat: the bias
    // estimate is built from the same data, so its covariance with the level
    // term enters with a negative sign.
    VariancePair out;
    out.conventional = var_conv;
    out.rbc = var_conv - 2.0 * h * h * cross + h * h * h * h * vtail;
    out.exact_fit = sp.exact_fit && sm.exact_fit;
    if (!(out.rbc > 0.0) && !out.exact_fit) throw NonPositiveVariance();
    return out;
}

RbcEstimate rbc_estimate(const RddDataset& data, const CellPartition& part,
                         const EstimandSpec& spec, double h, double b,
                         const KernelSpec& kernel, const EstimateOptions& opts) {
    if (!(opts.level > 0.0 && opts.level < 1.0))
        throw std::invalid_argument("confidence level must be in (0,1)");

    const CellPartition used =
        opts.pi_within_bandwidth ? pi_within_bandwidth(data, part, h) : part;
    CellDiscontinuities d = cell_discontinuities(data, used, opts.p, h, kernel);
    WlateResult point = wlate(d, spec);
    LinearizationCoeffs coeffs = linearization_coeffs(d, spec, point.beta_hat);

    RbcEstimate out;
    out.beta_hat = point.beta_hat;
    out.h = h;
    out.b = b;
    out.level = opts.level;
    out.bias_hat = bias_estimate(data, used, coeffs, h, b, kernel);
    out.beta_bc = out.beta_hat - h * h * out.bias_hat;
    VariancePair vp = rbc_variance(data, used, coeffs, h, b, kernel);
    out.var_conventional = vp.conventional;
    out.var_rbc = vp.rbc;
    out.exact_fit = vp.exact_fit;
    out.weak_id_ratio = std::sqrt(std::max(vp.conventional, 0.0)) / std::abs(coeffs.tau_x);
    const double zq = norm_quantile(1.0 - (1.0 - opts.level) / 2.0);
    const double half = zq * std::sqrt(std::max(out.var_rbc, 0.0));
    out.ci = {out.beta_bc - half, out.beta_bc + half};
    return out;
}

}  // namespace cwlate
