#include "cwlate/policy.hpp"

#include <stdexcept>

namespace cwlate {

Eigen::VectorXd weights_from_instrument(const Eigen::VectorXd& b, const Eigen::VectorXd& delta_x,
                                        const Eigen::VectorXd& pi) {
    const Eigen::Index m = b.size();
    if (delta_x.size() != m || pi.size() != m)
        throw std::invalid_argument("instrument, first stage and shares must have equal length");
    double denom = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (b(j) * delta_x(j) < 0.0) throw SignViolation(static_cast<std::size_t>(j));
        denom += pi(j) * b(j) * delta_x(j);
    }
    if (!(denom > 0.0)) throw DegenerateDenominator();
    Eigen::VectorXd omega(m);
    for (Eigen::Index j = 0; j < m; ++j) omega(j) = b(j) * delta_x(j) / denom;
    return omega;
}

PolicySpec policy_from_instrument(const Eigen::VectorXd& b, const Eigen::VectorXd& f) {
    const Eigen::Index m = b.size();
    if (f.size() != m) throw std::invalid_argument("instrument and f must have equal length");
    double denom = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (f(j) > 0.0 && b(j) < 0.0)
            throw std::invalid_argument("instrument must be nonnegative on the support of f");
        denom += f(j) * b(j);
    }
    if (!(denom > 0.0)) throw DegenerateDenominator();
    PolicySpec spec;
    spec.f = f;
    spec.p.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) spec.p(j) = f(j) * b(j) / denom;
    return spec;
}

PolicyEffects policy_effects(const PolicySpec& spec, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& delta_x) {
    const Eigen::Index m = spec.p.size();
    if (beta.size() != m || delta_x.size() != m)
        throw std::invalid_argument("policy vectors must have equal length");
    PolicyEffects out;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (delta_x(j) < 0.0) throw NegativeCompliance(static_cast<std::size_t>(j));
        out.p_c += delta_x(j) * spec.p(j);
        out.ape += beta(j) * delta_x(j) * spec.p(j);
    }
    if (out.p_c > 0.0) out.lape = out.ape / out.p_c;
    return out;
}

}  // namespace cwlate
