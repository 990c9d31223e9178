#pragma once

#include <Eigen/Dense>
#include <optional>

#include "cwlate/errors.hpp"

namespace cwlate {

struct PolicySpec {
    Eigen::VectorXd p;  // targeting distribution over cells
    Eigen::VectorXd f;  // population cell probabilities
};

struct PolicyEffects {
    double p_c = 0.0;                 // probability an incentive reaches a complier
    double ape = 0.0;                 // expected effect per incentive offered
    std::optional<double> lape;       // ape / p_c, empty when p_c == 0
};

// omega_j = b_j dx_j / sum_k pi_k b_k dx_k; requires b_j dx_j >= 0 and a
// positive denominator.
Eigen::VectorXd weights_from_instrument(const Eigen::VectorXd& b, const Eigen::VectorXd& delta_x,
                                        const Eigen::VectorXd& pi);

// p_j = b_j f_j / sum_k f_k b_k.
PolicySpec policy_from_instrument(const Eigen::VectorXd& b, const Eigen::VectorXd& f);

PolicyEffects policy_effects(const PolicySpec& spec, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& delta_x);

}  // namespace cwlate
