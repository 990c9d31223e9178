#include "cwlate/bandwidth.hpp"

#include <algorithm>
#include <cmath>

#include "cwlate/stats.hpp"

namespace cwlate {

double pilot_constant(const KernelSpec& kernel) {
    return kernel.kind == KernelKind::uniform ? 1.843 : 2.576;
}

double pilot_bandwidth(const std::vector<double>& z, const KernelSpec& kernel) {
    if (z.size() < 2) throw DegenerateSample();
    const double s = sample_sd(z);
    if (!(s > 0.0)) throw DegenerateSample();
    const double iqr = interquartile_range(z);
    double spread = s;
    if (iqr > 0.0) spread = std::min(s, iqr / 1.349);
    return pilot_constant(kernel) * spread * std::pow(static_cast<double>(z.size()), -0.2);
}

std::pair<double, double> bandwidth_clamps(const RddDataset& data, const CellPartition& part,
                                           std::size_t min_side_count) {
    const std::size_t m = part.m();
    std::vector<std::vector<double>> absz(2 * m);
    double zmin = 0.0, zmax = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        const int j = part.cell_index[i];
        if (j < 0) continue;
        zmin = std::min(zmin, data.z[i]);
        zmax = std::max(zmax, data.z[i]);
        const std::size_t slot = 2 * static_cast<std::size_t>(j) + (data.z[i] < 0.0 ? 1 : 0);
        absz[slot].push_back(std::abs(data.z[i]));
    }
    double lower = 0.0;
    for (auto& v : absz) {
        if (v.size() < min_side_count) continue;  // partition construction guards this
        std::nth_element(v.begin(), v.begin() + static_cast<long>(min_side_count) - 1, v.end());
        lower = std::max(lower, v[min_side_count - 1]);
    }
    // Triangular weights vanish at |z| = h, so nudge past the k-th point.
    lower = lower * 1.001 + 1e-12;
    double upper = zmax - zmin;
    if (upper < lower) upper = lower;
    return {lower, upper};
}

namespace {

double clampv(double v, double lo, double hi) {
    if (!(v > 0.0) || !std::isfinite(v)) return hi;
    return std::min(std::max(v, lo), hi);
}

struct DerivPilot {
    // Per-cell limit constants for the third-derivative MSE of one variable
    // on one side, evaluated at the rule-of-thumb bandwidth.
    Eigen::VectorXd var_limit;
    Eigen::VectorXd bias_const;
};

DerivPilot deriv_pilot(const RddDataset& data, const CellPartition& part, Var variable,
                       Side side, double c_n, const KernelSpec& kernel) {
    const std::size_t m = part.m();
    const double n = static_cast<double>(part.n_retained);

    // Order-1 residuals at c_n feed every plug-in covariance.
    SideFit f1 = fit_side(data, part, variable, side, 1, c_n, kernel);
    std::vector<double> res = side_residuals(data, part, variable, f1);

    MomentMatrices mom3 = moment_matrices(data, part, 3, 4, c_n, c_n, kernel);
    Eigen::MatrixXd psi33 = residual_psi(data, part, res, res, 3, 3, c_n, c_n, side, kernel);
    const Eigen::MatrixXd& g3 =
        side == Side::plus ? mom3.gamma_plus : mom3.gamma_minus;
    BiasConstants b334 = bias_constants(mom3, 3);  // 3! e_3' Gamma_3^-1 vartheta_{3,4}
    const Eigen::VectorXd& bconst = side == Side::plus ? b334.b_plus : b334.b_minus;

    SideFit f4 = fit_side(data, part, variable, side, 4, c_n, kernel);
    Eigen::VectorXd d4 = f4.derivative(4);

    DerivPilot out;
    out.var_limit.resize(static_cast<Eigen::Index>(m));
    out.bias_const.resize(static_cast<Eigen::Index>(m));
    const double c6 = std::pow(c_n, 6);
    for (std::size_t j = 0; j < m; ++j) {
        Eigen::MatrixXd g3j = cell_block(g3, m, j, 4, 4);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(g3j);
        if (!lu.isInvertible()) throw SingularGamma(side_name(side));
        Eigen::MatrixXd g3inv = lu.inverse();
        Eigen::MatrixXd pj = cell_block(psi33, m, j, 4, 4);
        // Var[mu^{(3)}(c)] = 36/(n c^6) [G^-1 Psi G^-1]_{33}; limit = n c^7 Var.
        const double var_fin = 36.0 * (g3inv * pj * g3inv)(3, 3) / (n * c6);
        const Eigen::Index ej = static_cast<Eigen::Index>(j);
        out.var_limit(ej) = n * std::pow(c_n, 7) * var_fin;
        out.bias_const(ej) = d4(ej) / 24.0 * bconst(ej);
    }
    return out;
}

double aggregate_pilot_bandwidth(const DerivPilot& dp, const CellPartition& part,
                                 double lower, double upper) {
    double v = 0.0, b2 = 0.0;
    for (Eigen::Index j = 0; j < dp.var_limit.size(); ++j) {
        const double pi = part.pi_hat[static_cast<std::size_t>(j)];
        v += pi * dp.var_limit(j);
        b2 += pi * dp.bias_const(j) * dp.bias_const(j);
    }
    const double n = static_cast<double>(part.n_retained);
    if (!(b2 > 0.0)) return upper;
    const double c = 7.0 * v / (2.0 * b2);
    return clampv(std::pow(c, 1.0 / 9.0) * std::pow(n, -1.0 / 9.0), lower, upper);
}

}  // namespace

BiasBandwidth bias_bandwidth(const RddDataset& data, const CellPartition& part,
                             const LinearizationCoeffs& coeffs, double c_n,
                             const KernelSpec& kernel, double lower, double upper) {
    const double n = static_cast<double>(part.n_retained);
    BiasBandwidth out;

    // Variance of the plug-in bias estimate at the rule-of-thumb bandwidth,
    // turned into its n,h-free limit constant.
    CellDiscontinuities base = cell_discontinuities(data, part, 1, c_n, kernel);
    double var_fin = 0.0;
    bool exact = true;
    for (Side side : {Side::plus, Side::minus}) {
        VarianceBlocks vb = variance_blocks(data, part, base, c_n, c_n, side, kernel);
        exact = exact && vb.exact_fit;
        for (Eigen::Index j = 0; j < coeffs.c1.size(); ++j) {
            const double a = coeffs.c1(j), c2j = coeffs.c2(j);
            const double d = vb.bconst(j);  // scale on theta_2/b^2 in the bias estimate
            var_fin += (a * a * vb.covdd_yy(j) + 2.0 * a * c2j * vb.covdd_yx(j) +
                        c2j * c2j * vb.covdd_xx(j)) * d * d;
        }
    }
    out.v_bc = n * std::pow(c_n, 5) * var_fin;
    if (exact) {
        // Deterministic data: no noise, no curvature signal; the MSE trade-off
        // is vacuous, so fall back to the widest feasible window.
        out.zero_bias = true;
        out.b_n = upper;
        out.d_n = {upper, upper, upper, upper};
        return out;
    }

    // Inner pilots for each variable/side third derivative.
    DerivPilot pyp = deriv_pilot(data, part, Var::Y, Side::plus, c_n, kernel);
    DerivPilot pym = deriv_pilot(data, part, Var::Y, Side::minus, c_n, kernel);
    DerivPilot pxp = deriv_pilot(data, part, Var::X, Side::plus, c_n, kernel);
    DerivPilot pxm = deriv_pilot(data, part, Var::X, Side::minus, c_n, kernel);
    out.d_n = {aggregate_pilot_bandwidth(pyp, part, lower, upper),
               aggregate_pilot_bandwidth(pym, part, lower, upper),
               aggregate_pilot_bandwidth(pxp, part, lower, upper),
               aggregate_pilot_bandwidth(pxm, part, lower, upper)};

    // Bias of the bias estimate: third derivatives at the inner pilots times
    // the composed kernel constants at c_n.
    MomentMatrices mom12 = moment_matrices(data, part, 1, 2, c_n, c_n, kernel);
    BiasConstants b12 = bias_constants(mom12, 0);
    MomentMatrices mom23 = moment_matrices(data, part, 2, 3, c_n, c_n, kernel);
    BiasConstants b223 = bias_constants(mom23, 2);

    SideFit y3p = fit_side(data, part, Var::Y, Side::plus, 3, out.d_n[0], kernel);
    SideFit y3m = fit_side(data, part, Var::Y, Side::minus, 3, out.d_n[1], kernel);
    SideFit x3p = fit_side(data, part, Var::X, Side::plus, 3, out.d_n[2], kernel);
    SideFit x3m = fit_side(data, part, Var::X, Side::minus, 3, out.d_n[3], kernel);

    Eigen::VectorXd by =
        (y3p.derivative(3) / 6.0).cwiseProduct(b223.b_plus / 2.0).cwiseProduct(b12.b_plus) -
        (y3m.derivative(3) / 6.0).cwiseProduct(b223.b_minus / 2.0).cwiseProduct(b12.b_minus);
    Eigen::VectorXd bx =
        (x3p.derivative(3) / 6.0).cwiseProduct(b223.b_plus / 2.0).cwiseProduct(b12.b_plus) -
        (x3m.derivative(3) / 6.0).cwiseProduct(b223.b_minus / 2.0).cwiseProduct(b12.b_minus);
    out.b_bc = coeffs.c1.dot(by) + coeffs.c2.dot(bx);

    if (!(out.b_bc * out.b_bc > 0.0)) {
        out.zero_bias = true;
        out.b_n = upper;
        return out;
    }
    const double c = 5.0 * out.v_bc / (2.0 * out.b_bc * out.b_bc);
    out.b_n = clampv(std::pow(c, 1.0 / 7.0) * std::pow(n, -1.0 / 7.0), lower, upper);
    return out;
}

MainBandwidth main_bandwidth(const RddDataset& data, const CellPartition& part,
                             const LinearizationCoeffs& coeffs, double c_n, double b_n,
                             const KernelSpec& kernel, double lower, double upper) {
    const double n = static_cast<double>(part.n_retained);
    MainBandwidth out;

    CellDiscontinuities base = cell_discontinuities(data, part, 1, c_n, kernel);
    double var_fin = 0.0;
    bool exact = true;
    for (Side side : {Side::plus, Side::minus}) {
        VarianceBlocks vb = variance_blocks(data, part, base, c_n, c_n, side, kernel);
        exact = exact && vb.exact_fit;
        for (Eigen::Index j = 0; j < coeffs.c1.size(); ++j) {
            const double a = coeffs.c1(j), c2j = coeffs.c2(j);
            var_fin += a * a * vb.cov00_yy(j) + 2.0 * a * c2j * vb.cov00_yx(j) +
                       c2j * c2j * vb.cov00_xx(j);
        }
    }
    out.v_main = n * c_n * var_fin;
    out.bias_main = bias_estimate(data, part, coeffs, c_n, b_n, kernel);

    if (exact || !(out.bias_main * out.bias_main > 0.0)) {
        out.zero_bias = true;
        out.h_n = upper;
        return out;
    }
    const double c = out.v_main / (4.0 * out.bias_main * out.bias_main);
    out.h_n = clampv(std::pow(c, 0.2) * std::pow(n, -0.2), lower, upper);
    return out;
}

BandwidthReport select_bandwidths(const RddDataset& data, const CellPartition& part,
                                  const EstimandSpec& spec, const KernelSpec& kernel,
                                  std::size_t min_side_count) {
    BandwidthReport rep;
    auto [lower, upper] = bandwidth_clamps(data, part, min_side_count);
    rep.lower_clamp = lower;
    rep.upper_clamp = upper;

    std::vector<double> z;
    z.reserve(part.n_retained);
    for (std::size_t i = 0; i < data.n(); ++i)
        if (part.cell_index[i] >= 0) z.push_back(data.z[i]);
    rep.c_n = std::min(std::max(pilot_bandwidth(z, kernel), lower), upper);

    CellDiscontinuities d0 = cell_discontinuities(data, part, 1, rep.c_n, kernel);
    WlateResult point = wlate(d0, spec);
    LinearizationCoeffs coeffs = linearization_coeffs(d0, spec, point.beta_hat);

    BiasBandwidth bb = bias_bandwidth(data, part, coeffs, rep.c_n, kernel, lower, upper);
    rep.d_n = bb.d_n;
    rep.b_n = bb.b_n;
    rep.v_bc = bb.v_bc;
    rep.b_bc = bb.b_bc;
    rep.zero_bias_b = bb.zero_bias;

    MainBandwidth mh = main_bandwidth(data, part, coeffs, rep.c_n, rep.b_n, kernel, lower, upper);
    rep.h_n = mh.h_n;
    rep.v_main = mh.v_main;
    rep.bias_main = mh.bias_main;
    rep.zero_bias_h = mh.zero_bias;
    return rep;
}

}  // namespace cwlate
