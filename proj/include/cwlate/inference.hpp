#pragma once

#include <Eigen/Dense>
#include <utility>

#include "cwlate/estimators.hpp"

namespace cwlate {

// First-order expansion of the Wald ratio in the cell discontinuities:
// beta_hat - beta ~ c1'(dY_hat - dY) + c2'(dX_hat - dX).
struct LinearizationCoeffs {
    Eigen::VectorXd c;        // pi_j b_j
    Eigen::VectorXd c1;       // c / tau_x
    Eigen::VectorXd c2;
    Eigen::MatrixXd g_delta;  // d c / d delta_x
    double tau_x = 0.0;
    double beta_hat = 0.0;
};

LinearizationCoeffs linearization_coeffs(const CellDiscontinuities& d,
                                         const EstimandSpec& spec, double beta_hat);

// Leading smoothing-bias coefficient B such that bias(beta_hat) ~ h^2 B,
// built from one-sided second derivatives at pilot bandwidth b.
double bias_estimate(const RddDataset& data, const CellPartition& part,
                     const LinearizationCoeffs& coeffs, double h, double b,
                     const KernelSpec& kernel);

// Per-cell sandwich scalars for one side; the cross-cell blocks vanish, so
// every piece is one number per cell. cov00 terms are level covariances at h;
// cov0d couple the level with the scaled second derivative estimated at b;
// covdd are the scaled second-derivative covariances at b. bconst holds
// e_0' Gamma_1(h)^-1 vartheta_{1,2}(h).
struct VarianceBlocks {
    Eigen::VectorXd cov00_yy, cov00_yx, cov00_xx;
    Eigen::VectorXd cov0d_yy, cov0d_yx, cov0d_xx;
    Eigen::VectorXd covdd_yy, covdd_yx, covdd_xx;
    Eigen::VectorXd bconst;
    bool exact_fit = true;
};

VarianceBlocks variance_blocks(const RddDataset& data, const CellPartition& part,
                               const CellDiscontinuities& base, double h, double b,
                               Side side, const KernelSpec& kernel);

struct VariancePair {
    double conventional = 0.0;
    double rbc = 0.0;
    bool exact_fit = false;  // all plug-in residuals numerically zero
};

VariancePair rbc_variance(const RddDataset& data, const CellPartition& part,
                          const LinearizationCoeffs& coeffs, double h, double b,
                          const KernelSpec& kernel);

struct RbcEstimate {
    double beta_hat = 0.0;
    double beta_bc = 0.0;
    double bias_hat = 0.0;
    double var_conventional = 0.0;
    double var_rbc = 0.0;
    double h = 0.0;
    double b = 0.0;
    double level = 0.95;
    std::pair<double, double> ci{0.0, 0.0};
    bool exact_fit = false;
    double weak_id_ratio = 0.0;  // sqrt(var_conventional)/|tau_x| diagnostic
};

struct EstimateOptions {
    int p = 1;
    double level = 0.95;
    bool pi_within_bandwidth = false;
};

RbcEstimate rbc_estimate(const RddDataset& data, const CellPartition& part,
                         const EstimandSpec& spec, double h, double b,
                         const KernelSpec& kernel, const EstimateOptions& opts = {});

}  // namespace cwlate
