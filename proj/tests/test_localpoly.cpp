#include <cmath>
#include <random>

#include "cwlate/localpoly.hpp"
#include "doctest.h"

using namespace cwlate;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const KernelSpec kTri{KernelKind::triangular};
const KernelSpec kUni{KernelKind::uniform};

RddDataset grid_data(std::size_t per_side, double lo, double hi,
                     double (*fy)(double), const std::vector<std::string>& labels) {
    RddDataset d;
    for (const auto& lab : labels)
        for (std::size_t i = 0; i < per_side; ++i) {
            const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(per_side);
            for (double sgn : {1.0, -1.0}) {
                const double z = sgn * (lo + t * (hi - lo));
                d.z.push_back(z);
                d.y.push_back(fy(z));
                d.x.push_back(z >= 0 ? 1.0 : 0.0);
                d.cell.push_back(lab);
            }
        }
    return d;
}

RddDataset draw_dataset(std::mt19937_64& gen, std::size_t m, std::size_t n) {
    std::uniform_real_distribution<double> zu(-1.0, 1.0);
    std::normal_distribution<double> eps(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> cidx(0, m - 1);
    std::bernoulli_distribution xdist(0.5);
    RddDataset d;
    for (std::size_t i = 0; i < n; ++i) {
        d.z.push_back(zu(gen));
        d.y.push_back(eps(gen) + 0.5 * d.z.back());
        d.x.push_back(xdist(gen) ? 1.0 : 0.0);
        d.cell.push_back("c" + std::to_string(cidx(gen)));
    }
    return d;
}

// Direct unscaled-basis WLS for one cell and side: the independent oracle.
VectorXd direct_wls(const RddDataset& d, const std::string& label, Side side, int p,
                    double h, const KernelSpec& kernel) {
    MatrixXd a = MatrixXd::Zero(p + 1, p + 1);
    VectorXd r = VectorXd::Zero(p + 1);
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (d.cell[i] != label) continue;
        const bool plus = d.z[i] >= 0.0;
        if ((side == Side::plus) != plus) continue;
        const double w = kernel_weight(d.z[i] / h, kernel) / h;
        if (w <= 0.0) continue;
        VectorXd basis(p + 1);
        basis(0) = 1.0;
        for (int k = 1; k <= p; ++k) basis(k) = basis(k - 1) * d.z[i];
        a += w * basis * basis.transpose();
        r += w * d.y[i] * basis;
    }
    return a.fullPivLu().solve(r);
}

}  // namespace

TEST_CASE("local linear reproduces linear data exactly") {
    RddDataset d = grid_data(40, 0.01, 0.9, [](double z) { return 3.0 + 2.0 * z; }, {"a"});
    CellPartition p = build_partition(d, 5);
    SideFit f = fit_side(d, p, Var::Y, Side::plus, 1, 0.7, kTri);
    CHECK(f.coef(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(f.coef(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("three-point closed form") {
    // (0.1,1),(0.2,2),(0.3,3) on the plus side: intercept 0, slope 10.
    RddDataset d;
    for (int i = 1; i <= 3; ++i) {
        d.z.push_back(0.1 * i);
        d.y.push_back(static_cast<double>(i));
        d.x.push_back(1.0);
        d.cell.push_back("a");
    }
    for (int i = 1; i <= 5; ++i) {  // padding so the partition keeps the cell
        d.z.push_back(-0.1 * i);
        d.y.push_back(0.0);
        d.x.push_back(0.0);
        d.cell.push_back("a");
    }
    CellPartition p = build_partition(d, 3);
    SideFit f = fit_side(d, p, Var::Y, Side::plus, 1, 1.0, kUni);
    CHECK(f.coef(0, 0) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(f.coef(0, 1) == doctest::Approx(10.0).epsilon(1e-10));
}

TEST_CASE("stacked fit equals per-cell direct normal equations") {
    std::mt19937_64 gen(42);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t m = 1 + gen() % 5;
        const std::size_t n = 200 + gen() % 300;
        RddDataset d = draw_dataset(gen, m, n);
        CellPartition part;
        try {
            part = build_partition(d, 5);
        } catch (const AllCellsDropped&) {
            continue;
        }
        const double h = 0.8;
        for (Side side : {Side::plus, Side::minus}) {
            SideFit f = fit_side(d, part, Var::Y, side, 1, h, kTri);
            for (std::size_t j = 0; j < part.m(); ++j) {
                VectorXd oracle = direct_wls(d, part.labels[j], side, 1, h, kTri);
                CHECK(std::abs(f.coef(j, 0) - oracle(0)) < 1e-10);
                CHECK(std::abs(f.coef(j, 1) - oracle(1)) < 1e-10);
            }
        }
    }
}

TEST_CASE("insufficient support and singular design are reported") {
    RddDataset d;
    for (int i = 0; i < 6; ++i) {
        d.z.push_back(i < 3 ? 0.1 : -0.1 * (i - 2));
        d.y.push_back(1.0);
        d.x.push_back(0.0);
        d.cell.push_back("a");
    }
    CellPartition p = build_partition(d, 3);
    // all plus-side z identical -> rank-deficient local linear design
    CHECK_THROWS_AS(fit_side(d, p, Var::Y, Side::plus, 1, 1.0, kUni), SingularDesign);
    // tiny bandwidth leaves no in-band points
    CHECK_THROWS_AS(fit_side(d, p, Var::Y, Side::plus, 1, 0.01, kUni), InsufficientSupport);
}

TEST_CASE("step functions give unit discontinuities") {
    RddDataset d = grid_data(30, 0.02, 0.95, [](double z) { return z >= 0 ? 1.0 : 0.0; },
                             {"a", "b"});
    CellPartition p = build_partition(d, 5);
    CellDiscontinuities cd = cell_discontinuities(d, p, 1, 0.8, kTri);
    for (Eigen::Index j = 0; j < 2; ++j) {
        CHECK(cd.delta_y(j) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(cd.delta_x(j) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("location shift leaves discontinuities unchanged") {
    std::mt19937_64 gen(5);
    RddDataset d = draw_dataset(gen, 2, 400);
    CellPartition p = build_partition(d, 5);
    CellDiscontinuities base = cell_discontinuities(d, p, 1, 0.7, kTri);
    RddDataset shifted = d;
    for (auto& v : shifted.y) v += 17.5;
    CellDiscontinuities moved = cell_discontinuities(shifted, p, 1, 0.7, kTri);
    for (Eigen::Index j = 0; j < base.delta_y.size(); ++j) {
        CHECK(std::abs(moved.delta_y(j) - base.delta_y(j)) < 1e-12);
        CHECK(moved.y_plus.coef(j, 0) ==
              doctest::Approx(base.y_plus.coef(j, 0) + 17.5).epsilon(1e-12));
        CHECK(moved.y_plus.coef(j, 1) == doctest::Approx(base.y_plus.coef(j, 1)).epsilon(1e-10));
    }
}

TEST_CASE("scale equivariance of fits and psi") {
    std::mt19937_64 gen(6);
    RddDataset d = draw_dataset(gen, 1, 300);
    CellPartition p = build_partition(d, 5);
    const double h = 0.6, a = 3.5;

    SideFit f0 = fit_side(d, p, Var::Y, Side::plus, 1, h, kTri);
    std::vector<double> r0 = side_residuals(d, p, Var::Y, f0);
    MatrixXd psi0 = residual_psi(d, p, r0, r0, 1, 1, h, h, Side::plus, kTri);

    RddDataset ds = d;
    for (auto& v : ds.y) v *= a;
    SideFit f1 = fit_side(ds, p, Var::Y, Side::plus, 1, h, kTri);
    std::vector<double> r1 = side_residuals(ds, p, Var::Y, f1);
    MatrixXd psi1 = residual_psi(ds, p, r1, r1, 1, 1, h, h, Side::plus, kTri);

    CHECK(f1.coef(0, 0) == doctest::Approx(a * f0.coef(0, 0)).epsilon(1e-10));
    CHECK(f1.coef(0, 1) == doctest::Approx(a * f0.coef(0, 1)).epsilon(1e-10));
    CHECK(psi1(0, 0) == doctest::Approx(a * a * psi0(0, 0)).epsilon(1e-10));
}

TEST_CASE("mirror symmetry flips slopes and keeps intercepts") {
    std::mt19937_64 gen(7);
    RddDataset d = draw_dataset(gen, 1, 300);
    CellPartition p = build_partition(d, 5);
    SideFit plus = fit_side(d, p, Var::Y, Side::plus, 1, 0.6, kTri);

    RddDataset mir = d;
    for (auto& z : mir.z) z = -z;
    // observations exactly at 0 would switch sides; the draw has none
    CellPartition pm = build_partition(mir, 5);
    SideFit minus = fit_side(mir, pm, Var::Y, Side::minus, 1, 0.6, kTri);
    CHECK(minus.coef(0, 0) == doctest::Approx(plus.coef(0, 0)).epsilon(1e-9));
    CHECK(minus.coef(0, 1) == doctest::Approx(-plus.coef(0, 1)).epsilon(1e-9));
}

TEST_CASE("gamma matrices: limits, empty side, block structure") {
    // dense even grid on (-1,1), uniform kernel, h=1: Gamma entries approach
    // f * int u^{j+k} k(u) du with f = 0.5 on each side.
    RddDataset d = grid_data(100000, 0.0, 1.0, [](double) { return 0.0; }, {"a"});
    CellPartition p = build_partition(d, 5);
    MomentMatrices mom = moment_matrices(d, p, 1, 2, 1.0, 1.0, kUni);
    const double f = 0.5;
    CHECK(mom.gamma_plus(0, 0) == doctest::Approx(f * 0.5).epsilon(0.01));
    CHECK(mom.gamma_plus(0, 1) == doctest::Approx(f * 0.25).epsilon(0.01));
    CHECK(mom.gamma_plus(1, 1) == doctest::Approx(f * 0.5 / 3.0).epsilon(0.01));
    CHECK(mom.gamma_minus(0, 1) == doctest::Approx(-f * 0.25).epsilon(0.01));

    // vartheta with q=2: f * int u^{1+2} k du on the plus side
    CHECK(mom.vartheta_plus(0, 0) == doctest::Approx(f * 0.5 / 3.0).epsilon(0.01));
    CHECK(mom.vartheta_plus(1, 0) == doctest::Approx(f * 0.125).epsilon(0.01));

    // no minus-side observations -> zero matrix
    RddDataset right;
    for (int i = 0; i < 20; ++i) {
        right.z.push_back(0.01 * (i + 1));
        right.y.push_back(0.0);
        right.x.push_back(0.0);
        right.cell.push_back("a");
    }
    CellPartition pr = build_partition(right, 0);
    MomentMatrices mr = moment_matrices(right, pr, 1, 2, 1.0, 1.0, kUni);
    CHECK(mr.gamma_minus.norm() == 0.0);

    // two cells: off-diagonal cross-cell blocks vanish
    std::mt19937_64 gen(8);
    RddDataset d2 = draw_dataset(gen, 2, 400);
    CellPartition p2 = build_partition(d2, 5);
    MomentMatrices m2 = moment_matrices(d2, p2, 1, 2, 0.8, 0.8, kTri);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (std::size_t j = 0; j < 2; ++j)
                for (std::size_t g = 0; g < 2; ++g)
                    if (j != g) CHECK(m2.gamma_plus(a * 2 + j, b * 2 + g) == 0.0);
}

TEST_CASE("psi: zero residuals, symmetry, noise magnitude") {
    // deterministic linear data -> zero residuals -> zero psi
    RddDataset lin = grid_data(50, 0.01, 0.9, [](double z) { return 1.0 + 2.0 * z; }, {"a"});
    CellPartition pl = build_partition(lin, 5);
    SideFit f = fit_side(lin, pl, Var::Y, Side::plus, 1, 0.8, kTri);
    std::vector<double> res = side_residuals(lin, pl, Var::Y, f);
    CHECK(residual_psi(lin, pl, res, res, 1, 1, 0.8, 0.8, Side::plus, kTri).norm() <
          1e-20);

    // symmetric PSD when U=V, p=q, h=b
    std::mt19937_64 gen(9);
    RddDataset d = draw_dataset(gen, 2, 500);
    CellPartition p = build_partition(d, 5);
    SideFit fy = fit_side(d, p, Var::Y, Side::plus, 1, 0.7, kTri);
    std::vector<double> ry = side_residuals(d, p, Var::Y, fy);
    MatrixXd psi = residual_psi(d, p, ry, ry, 1, 1, 0.7, 0.7, Side::plus, kTri);
    CHECK((psi - psi.transpose()).norm() < 1e-14);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(psi);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);

    // unit-noise magnitude oracle: p=q=0, dense z, uniform kernel, h=b=1
    std::mt19937_64 gen2(10);
    std::normal_distribution<double> eps(0.0, 1.0);
    RddDataset noisy;
    const std::size_t big = 100000;
    for (std::size_t i = 0; i < big; ++i) {
        const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(big);
        for (double sgn : {1.0, -1.0}) {
            noisy.z.push_back(sgn * t);
            noisy.y.push_back(eps(gen2));
            noisy.x.push_back(0.0);
            noisy.cell.push_back("a");
        }
    }
    CellPartition pn = build_partition(noisy, 5);
    SideFit f0 = fit_side(noisy, pn, Var::Y, Side::plus, 0, 1.0, kUni);
    std::vector<double> r0 = side_residuals(noisy, pn, Var::Y, f0);
    MatrixXd scalar = residual_psi(noisy, pn, r0, r0, 0, 0, 1.0, 1.0, Side::plus, kUni);
    CHECK(scalar(0, 0) == doctest::Approx(0.5 * 0.25).epsilon(0.05));
}

TEST_CASE("bias constants: identity case and mirrored design") {
    // On a design mirrored around 0 the plus and minus constants coincide for
    // even powers q.
    RddDataset d = grid_data(5000, 0.0, 1.0, [](double z) { return z; }, {"a"});
    CellPartition p = build_partition(d, 5);
    MomentMatrices mom = moment_matrices(d, p, 1, 2, 0.9, 0.9, kTri);
    BiasConstants bc = bias_constants(mom, 0);
    CHECK(bc.b_plus(0) == doctest::Approx(bc.b_minus(0)).epsilon(1e-9));

    // Gamma = I, vartheta = e0 -> first component of vartheta
    MomentMatrices unit;
    unit.p = 1;
    unit.q = 2;
    unit.m = 1;
    unit.gamma_plus = MatrixXd::Identity(2, 2);
    unit.gamma_minus = MatrixXd::Identity(2, 2);
    unit.vartheta_plus = MatrixXd::Zero(2, 1);
    unit.vartheta_plus(0, 0) = 1.0;
    unit.vartheta_minus = MatrixXd::Zero(2, 1);
    unit.vartheta_minus(1, 0) = 1.0;
    BiasConstants u = bias_constants(unit, 0);
    CHECK(u.b_plus(0) == 1.0);
    CHECK(u.b_minus(0) == 0.0);
}

TEST_CASE("exact quadratic data reproduces the leading coefficient") {
    RddDataset d = grid_data(200, 0.001, 0.95, [](double z) { return 0.7 * z * z; }, {"a"});
    CellPartition p = build_partition(d, 5);
    SideFit f2 = fit_side(d, p, Var::Y, Side::plus, 2, 0.8, kTri);
    CHECK(f2.derivative(2)(0) == doctest::Approx(1.4).epsilon(1e-9));
}
