#pragma once

#include <Eigen/Dense>
#include <map>
#include <tuple>
#include <vector>

#include "cwlate/data.hpp"

namespace cwlate {

enum class Side { plus, minus };
enum class Var { Y, X };

const char* side_name(Side s);

// One-sided local polynomial WLS, one row of coefficients per cell.
// coef(j, v) is the coefficient on z^v in the unscaled basis, so the v-th
// derivative at the cutoff is v! * coef(j, v).
struct SideFit {
    Side side;
    Var variable;
    int order = 1;
    double bandwidth = 0.0;
    Eigen::MatrixXd coef;                 // m x (order+1)
    std::vector<std::size_t> in_band;     // per cell, points with positive weight

    Eigen::VectorXd intercept() const { return coef.col(0); }
    Eigen::VectorXd derivative(int v) const;
};

SideFit fit_side(const RddDataset& data, const CellPartition& part, Var variable,
                 Side side, int p, double h, const KernelSpec& kernel);

struct CellDiscontinuities {
    Eigen::VectorXd delta_y;
    Eigen::VectorXd delta_x;
    CellPartition partition;
    double bandwidth = 0.0;
    int order = 1;
    SideFit y_plus, y_minus, x_plus, x_minus;
};

CellDiscontinuities cell_discontinuities(const RddDataset& data, const CellPartition& part,
                                         int p, double h, const KernelSpec& kernel);

// Sample moment matrices in the h-rescaled basis r_p(z/h) (x) cell indicators,
// normalized by the retained sample size. Kronecker ordering: entry a*m + j is
// power a, cell j.
struct MomentMatrices {
    int p = 1;
    int q = 2;
    double h = 0.0;
    double b = 0.0;
    std::size_t m = 0;
    std::size_t n = 0;
    Eigen::MatrixXd gamma_plus, gamma_minus;       // m(p+1) square, at bandwidth h
    Eigen::MatrixXd gammaq_plus, gammaq_minus;     // m(q+1) square, at bandwidth b
    Eigen::MatrixXd vartheta_plus, vartheta_minus; // m(p+1) x m, powers q at bandwidth h
};

MomentMatrices moment_matrices(const RddDataset& data, const CellPartition& part,
                               int p, int q, double h, double b, const KernelSpec& kernel);

// Per-observation plug-in residuals v - intercept(cell) on the fit's side;
// zero for observations on the other side or in dropped cells.
std::vector<double> side_residuals(const RddDataset& data, const CellPartition& part,
                                   Var variable, const SideFit& fit);

// Psi_{UV,p,q}(h,b) = n^-1 sum X_{i,p}(h) X_{i,q}(b)' eU_i eV_i k_h(z) k_b(z)
// over the requested side, in the rescaled bases.
Eigen::MatrixXd residual_psi(const RddDataset& data, const CellPartition& part,
                             const std::vector<double>& res_u, const std::vector<double>& res_v,
                             int p, int q, double h, double b, Side side,
                             const KernelSpec& kernel);

// s! * e_s' Gamma^-1 vartheta per cell (the cross-cell blocks vanish, so the
// result is one number per cell).
struct BiasConstants {
    Eigen::VectorXd b_plus;
    Eigen::VectorXd b_minus;
};

// Uses the fit order p and power q stored in mom: s! * e_s' Gamma_p(h)^-1 vartheta_{p,q}(h).
BiasConstants bias_constants(const MomentMatrices& mom, int s = 0);

// Per-cell blocks extracted from a stacked matrix with Kronecker ordering.
Eigen::MatrixXd cell_block(const Eigen::MatrixXd& stacked, std::size_t m,
                           std::size_t j, int rows, int cols);

}  // namespace cwlate
