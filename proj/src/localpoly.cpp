#include "cwlate/localpoly.hpp"

#include <cmath>
#include <stdexcept>

namespace cwlate {

const char* side_name(Side s) { return s == Side::plus ? "plus" : "minus"; }

namespace {

inline bool on_side(double z, Side s) { return s == Side::plus ? z >= 0.0 : z < 0.0; }

double tgamma_fact(int v) {
    double f = 1.0;
    for (int k = 2; k <= v; ++k) f *= k;
    return f;
}

}  // namespace

Eigen::VectorXd SideFit::derivative(int v) const {
    if (v < 0 || v > order) throw std::invalid_argument("derivative order out of range");
    return tgamma_fact(v) * coef.col(v);
}

SideFit fit_side(const RddDataset& data, const CellPartition& part, Var variable,
                 Side side, int p, double h, const KernelSpec& kernel) {
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    if (p < 0 || p > 4) throw std::invalid_argument("polynomial order out of range");
    const std::size_t m = part.m();
    const int d = p + 1;
    const std::vector<double>& v = (variable == Var::Y) ? data.y : data.x;

    std::vector<Eigen::MatrixXd> A(m, Eigen::MatrixXd::Zero(d, d));
    std::vector<Eigen::VectorXd> rhs(m, Eigen::VectorXd::Zero(d));
    std::vector<std::size_t> in_band(m, 0);

    Eigen::VectorXd r(d);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const int j = part.cell_index[i];
        if (j < 0 || !on_side(data.z[i], side)) continue;
        const double u = data.z[i] / h;
        const double w = kernel_weight(u, kernel) / h;
        if (w <= 0.0) continue;
        ++in_band[j];
        r(0) = 1.0;
        for (int a = 1; a < d; ++a) r(a) = r(a - 1) * u;
        A[j].noalias() += w * r * r.transpose();
        rhs[j].noalias() += w * v[i] * r;
    }

    SideFit fit;
    fit.side = side;
    fit.variable = variable;
    fit.order = p;
    fit.bandwidth = h;
    fit.in_band = in_band;
    fit.coef.resize(m, d);

    for (std::size_t j = 0; j < m; ++j) {
        if (in_band[j] < static_cast<std::size_t>(d))
            throw InsufficientSupport(part.labels[j], side_name(side));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A[j], Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double smin = svd.singularValues()(d - 1);
        const double smax = svd.singularValues()(0);
        if (!(smin > 0.0) || smax / smin > 1e12) throw SingularDesign(part.labels[j]);
        Eigen::VectorXd beta_u = svd.solve(rhs[j]);
        double scale = 1.0;
        for (int a = 0; a < d; ++a) {
            fit.coef(j, a) = beta_u(a) / scale;  // back to the unscaled z basis
            scale *= h;
        }
    }
    return fit;
}

CellDiscontinuities cell_discontinuities(const RddDataset& data, const CellPartition& part,
                                         int p, double h, const KernelSpec& kernel) {
    CellDiscontinuities d;
    d.partition = part;
    d.bandwidth = h;
    d.order = p;
    d.y_plus = fit_side(data, part, Var::Y, Side::plus, p, h, kernel);
    d.y_minus = fit_side(data, part, Var::Y, Side::minus, p, h, kernel);
    d.x_plus = fit_side(data, part, Var::X, Side::plus, p, h, kernel);
    d.x_minus = fit_side(data, part, Var::X, Side::minus, p, h, kernel);
    d.delta_y = d.y_plus.intercept() - d.y_minus.intercept();
    d.delta_x = d.x_plus.intercept() - d.x_minus.intercept();
    return d;
}

namespace {

// Accumulate sum_i r_p(z/h) r_q(z/b)' * weight_i per cell into stacked storage
// with Kronecker ordering (power a, cell j) -> a*m + j.
void accumulate_stacked(const RddDataset& data, const CellPartition& part, Side side,
                        int p, int q, double h, double b, const KernelSpec& kernel,
                        const std::vector<double>* scale_u, const std::vector<double>* scale_v,
                        bool both_kernels, Eigen::MatrixXd& out) {
    const std::size_t m = part.m();
    out.setZero(static_cast<Eigen::Index>(m) * (p + 1), static_cast<Eigen::Index>(m) * (q + 1));
    const double n = static_cast<double>(part.n_retained);
    Eigen::VectorXd rp(p + 1), rq(q + 1);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const int j = part.cell_index[i];
        if (j < 0 || !on_side(data.z[i], side)) continue;
        const double kh = kernel_weight(data.z[i] / h, kernel) / h;
        if (kh <= 0.0) continue;
        double w = kh;
        if (both_kernels) {
            const double kb = kernel_weight(data.z[i] / b, kernel) / b;
            if (kb <= 0.0) continue;
            w *= kb;
        }
        if (scale_u) w *= (*scale_u)[i];
        if (scale_v) w *= (*scale_v)[i];
        const double uh = data.z[i] / h;
        const double ub = data.z[i] / b;
        rp(0) = 1.0;
        for (int a = 1; a <= p; ++a) rp(a) = rp(a - 1) * uh;
        rq(0) = 1.0;
        for (int a = 1; a <= q; ++a) rq(a) = rq(a - 1) * ub;
        for (int a = 0; a <= p; ++a)
            for (int c = 0; c <= q; ++c)
                out(a * m + j, c * m + j) += w * rp(a) * rq(c) / n;
    }
}

}  // namespace

MomentMatrices moment_matrices(const RddDataset& data, const CellPartition& part,
                               int p, int q, double h, double b, const KernelSpec& kernel) {
    MomentMatrices mom;
    mom.p = p;
    mom.q = q;
    mom.h = h;
    mom.b = b;
    mom.m = part.m();
    mom.n = part.n_retained;
    // Gamma at (p, h): r_p r_p' with one kernel at h.
    accumulate_stacked(data, part, Side::plus, p, p, h, h, kernel, nullptr, nullptr, false,
                       mom.gamma_plus);
    accumulate_stacked(data, part, Side::minus, p, p, h, h, kernel, nullptr, nullptr, false,
                       mom.gamma_minus);
    // Gamma at (q, b).
    accumulate_stacked(data, part, Side::plus, q, q, b, b, kernel, nullptr, nullptr, false,
                       mom.gammaq_plus);
    accumulate_stacked(data, part, Side::minus, q, q, b, b, kernel, nullptr, nullptr, false,
                       mom.gammaq_minus);
    // vartheta: r_p (z/h)^q, kept as the stacked m(p+1) x m matrix. Reuse the
    // general accumulator with the (q, h) column basis and keep only power q.
    Eigen::MatrixXd tmp;
    accumulate_stacked(data, part, Side::plus, p, q, h, h, kernel, nullptr, nullptr, false, tmp);
    mom.vartheta_plus = tmp.rightCols(static_cast<Eigen::Index>(mom.m));
    accumulate_stacked(data, part, Side::minus, p, q, h, h, kernel, nullptr, nullptr, false, tmp);
    mom.vartheta_minus = tmp.rightCols(static_cast<Eigen::Index>(mom.m));
    return mom;
}

std::vector<double> side_residuals(const RddDataset& data, const CellPartition& part,
                                   Var variable, const SideFit& fit) {
    const std::vector<double>& v = (variable == Var::Y) ? data.y : data.x;
    std::vector<double> res(data.n(), 0.0);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const int j = part.cell_index[i];
        if (j < 0 || !on_side(data.z[i], fit.side)) continue;
        double fitted = 0.0;
        double zpow = 1.0;
        for (int c = 0; c <= fit.order; ++c) {
            fitted += fit.coef(j, c) * zpow;
            zpow *= data.z[i];
        }
        res[i] = v[i] - fitted;
    }
    return res;
}

Eigen::MatrixXd residual_psi(const RddDataset& data, const CellPartition& part,
                             const std::vector<double>& res_u, const std::vector<double>& res_v,
                             int p, int q, double h, double b, Side side,
                             const KernelSpec& kernel) {
    Eigen::MatrixXd out;
    accumulate_stacked(data, part, side, p, q, h, b, kernel, &res_u, &res_v, true, out);
    return out;
}

Eigen::MatrixXd cell_block(const Eigen::MatrixXd& stacked, std::size_t m,
                           std::size_t j, int rows, int cols) {
    Eigen::MatrixXd block(rows, cols);
    for (int a = 0; a < rows; ++a)
        for (int c = 0; c < cols; ++c)
            block(a, c) = stacked(a * m + j, c * m + j);
    return block;
}

BiasConstants bias_constants(const MomentMatrices& mom, int s) {
    if (s < 0 || s > mom.p) throw std::invalid_argument("derivative order exceeds fit order");
    const int d = mom.p + 1;
    BiasConstants out;
    out.b_plus.resize(static_cast<Eigen::Index>(mom.m));
    out.b_minus.resize(static_cast<Eigen::Index>(mom.m));
    const double sfact = tgamma_fact(s);
    for (std::size_t j = 0; j < mom.m; ++j) {
        for (int side = 0; side < 2; ++side) {
            const Eigen::MatrixXd& g = side == 0 ? mom.gamma_plus : mom.gamma_minus;
            const Eigen::MatrixXd& t = side == 0 ? mom.vartheta_plus : mom.vartheta_minus;
            Eigen::MatrixXd gj = cell_block(g, mom.m, j, d, d);
            Eigen::VectorXd tj(d);
            for (int a = 0; a < d; ++a) tj(a) = t(a * mom.m + j, j);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(gj);
            if (!lu.isInvertible()) throw SingularGamma(side == 0 ? "plus" : "minus");
            const double val = sfact * lu.solve(tj)(s);
            if (side == 0)
                out.b_plus(static_cast<Eigen::Index>(j)) = val;
            else
                out.b_minus(static_cast<Eigen::Index>(j)) = val;
        }
    }
    return out;
}

}  // namespace cwlate
