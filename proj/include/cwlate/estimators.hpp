#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cwlate/localpoly.hpp"

namespace cwlate {

enum class EstimandKind {
    cwlate,              // b = delta_x, weights prop. to pi * delta_x^2
    average,             // b = 1/delta_x, equal weights over cells
    counterfactual,      // b = (f*_j/pi_j)/delta_x, weights f*
    welfare,             // b = 1{delta_y >= 0}/delta_x
    custom_instrument,   // user-supplied b
    unconditional_wald,  // pooled single-cell Wald ratio
};

const char* estimand_name(EstimandKind k);

struct EstimandSpec {
    EstimandKind kind = EstimandKind::cwlate;
    Eigen::VectorXd fstar;     // counterfactual cell weights, length m
    Eigen::VectorXd custom_b;  // custom instrument, length m
    double zero_tol = 1e-8;
};

struct WlateResult {
    double beta_hat = 0.0;
    double tau_y = 0.0;        // sum_j pi_j b_j delta_y_j
    double tau_x = 0.0;        // sum_j pi_j b_j delta_x_j
    Eigen::VectorXd weights;   // discrete weights pi_j b_j delta_x_j / tau_x, sum to 1
    Eigen::VectorXd omega;     // weight density b_j delta_x_j / tau_x (E[omega] = 1)
    Eigen::VectorXd b_used;    // instrument actually applied
    Eigen::VectorXd conditional_lates;
    std::vector<std::uint8_t> defined;       // mask for conditional_lates
    std::vector<std::size_t> flagged_cells;  // welfare cells near the sign boundary
    std::vector<std::string> dropped;        // carried over from the partition
};

// beta as a function of the cell inputs alone; shared by the estimators and
// the finite-difference checks. Applies the same validation as wlate().
double beta_from_deltas(const Eigen::VectorXd& delta_y, const Eigen::VectorXd& delta_x,
                        const Eigen::VectorXd& pi, const EstimandSpec& spec);

WlateResult cwlate(const CellDiscontinuities& d);
WlateResult wlate(const CellDiscontinuities& d, const EstimandSpec& spec);

struct ConditionalLates {
    Eigen::VectorXd beta;
    std::vector<std::uint8_t> defined;
};

ConditionalLates conditional_lates(const CellDiscontinuities& d, double zero_tol = 1e-8);

WlateResult unconditional_wald(const RddDataset& data, int p, double h,
                               const KernelSpec& kernel, std::size_t min_side_count = 5);

enum class GainsSign { positive, negative, zero };
GainsSign selection_on_gains_sign(double beta_cw, double beta_u, double tol);

}  // namespace cwlate
