#include <cmath>
#include <random>

#include "cwlate/policy.hpp"
#include "cwlate/stats.hpp"
#include "doctest.h"

using namespace cwlate;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

}  // namespace

TEST_CASE("weights from instrument") {
    VectorXd ones = vec({1.0, 1.0});
    VectorXd pi = vec({0.5, 0.5});
    VectorXd w = weights_from_instrument(ones, ones, pi);
    CHECK(w(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(w(1) == doctest::Approx(1.0).epsilon(1e-14));

    const double d1 = norm_cdf(1.2) - norm_cdf(-1.0);
    const double d2 = norm_cdf(-0.8) - norm_cdf(-1.0);
    VectorXd dx = vec({d1, d2});
    VectorXd wcw = weights_from_instrument(dx, dx, pi);
    CHECK(wcw(0) / wcw(1) == doctest::Approx((d1 / d2) * (d1 / d2)).epsilon(1e-12));

    // b = 1/delta_x gives equal weights
    VectorXd binv = vec({1.0 / d1, 1.0 / d2});
    VectorXd weq = weights_from_instrument(binv, dx, pi);
    CHECK(weq(0) == doctest::Approx(weq(1)).epsilon(1e-12));

    CHECK_THROWS_AS(weights_from_instrument(vec({1.0, -1.0}), vec({0.5, 0.5}), pi),
                    SignViolation);
    CHECK_THROWS_AS(weights_from_instrument(vec({0.0, 0.0}), dx, pi), DegenerateDenominator);
}

TEST_CASE("policy from instrument") {
    VectorXd f = vec({0.5, 0.5});
    PolicySpec untargeted = policy_from_instrument(vec({3.0, 3.0}), f);
    CHECK(untargeted.p(0) == doctest::Approx(0.5).epsilon(1e-14));

    const double d1 = norm_cdf(1.2) - norm_cdf(-1.0);
    const double d2 = norm_cdf(-0.8) - norm_cdf(-1.0);
    PolicySpec tilt = policy_from_instrument(vec({d1, d2}), f);
    CHECK(tilt.p(0) == doctest::Approx(0.9317).epsilon(2e-3));
    CHECK(tilt.p(1) == doctest::Approx(0.0683).epsilon(2e-2));
    CHECK(tilt.p.sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("policy effects: point mass and untargeted") {
    PolicySpec pm{vec({1.0, 0.0}), vec({0.5, 0.5})};
    PolicyEffects e = policy_effects(pm, vec({4.0, 0.0}), vec({0.5, 0.2}));
    CHECK(e.p_c == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(e.ape == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(e.lape.value() == doctest::Approx(4.0).epsilon(1e-14));

    const double d1 = norm_cdf(1.2) - norm_cdf(-1.0);
    const double d2 = norm_cdf(-0.8) - norm_cdf(-1.0);
    PolicySpec flat{vec({0.5, 0.5}), vec({0.5, 0.5})};
    PolicyEffects u = policy_effects(flat, vec({4.0, 0.0}), vec({d1, d2}));
    CHECK(u.p_c == doctest::Approx((d1 + d2) / 2.0).epsilon(1e-12));
    CHECK(u.lape.value() == doctest::Approx(3.727).epsilon(2e-4));

    CHECK_THROWS_AS(policy_effects(flat, vec({1.0, 1.0}), vec({0.5, -0.1})),
                    NegativeCompliance);
}

TEST_CASE("identities on random admissible vectors") {
    std::mt19937_64 gen(55);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(gen() % 4);
        VectorXd dx(m), beta(m), f(m);
        double tot = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            dx(j) = u(gen);
            beta(j) = 4.0 * u(gen) - 1.0;
            f(j) = u(gen);
            tot += f(j);
        }
        f /= tot;

        // complier-proportional targeting reproduces the squared-first-stage
        // weighted effect
        PolicySpec cw = policy_from_instrument(dx, f);
        PolicyEffects ecw = policy_effects(cw, beta, dx);
        double num = 0.0, den = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            num += f(j) * dx(j) * dx(j) * beta(j);
            den += f(j) * dx(j) * dx(j);
        }
        CHECK(std::abs(ecw.lape.value() - num / den) < 1e-12);

        // untargeted policy reproduces the population Wald aggregate
        PolicySpec flat{f, f};
        PolicyEffects eu = policy_effects(flat, beta, dx);
        double nu = 0.0, de = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            nu += f(j) * dx(j) * beta(j);
            de += f(j) * dx(j);
        }
        CHECK(std::abs(eu.lape.value() - nu / de) < 1e-12);

        // round trip: p back to an instrument proportional to the original
        VectorXd b_rec(m);
        for (Eigen::Index j = 0; j < m; ++j) b_rec(j) = cw.p(j) / f(j);
        const double ratio = b_rec(0) / dx(0);
        for (Eigen::Index j = 0; j < m; ++j)
            CHECK(b_rec(j) == doctest::Approx(ratio * dx(j)).epsilon(1e-10));

        // APE is linear in the targeting distribution
        VectorXd p2(m);
        double t2 = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            p2(j) = u(gen);
            t2 += p2(j);
        }
        p2 /= t2;
        const double lam = u(gen);
        PolicySpec mixed{lam * cw.p + (1.0 - lam) * p2, f};
        PolicyEffects e1 = policy_effects(cw, beta, dx);
        PolicyEffects e2 = policy_effects(PolicySpec{p2, f}, beta, dx);
        PolicyEffects em = policy_effects(mixed, beta, dx);
        CHECK(em.ape == doctest::Approx(lam * e1.ape + (1.0 - lam) * e2.ape).epsilon(1e-12));
    }
}

TEST_CASE("lape is masked when no compliers are reachable") {
    PolicySpec spec{vec({1.0, 0.0}), vec({0.5, 0.5})};
    PolicyEffects e = policy_effects(spec, vec({1.0, 1.0}), vec({0.0, 0.5}));
    CHECK(e.p_c == 0.0);
    CHECK_FALSE(e.lape.has_value());
}
