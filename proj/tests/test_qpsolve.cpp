#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "gridstor/qpsolve.hpp"
#include "gridstor/netmodel.hpp"

using namespace gridstor;
using SpMat = Eigen::SparseMatrix<double>;

namespace {

QpProblem empty_problem(int n) {
    QpProblem p;
    p.n = n;
    p.Q = SpMat(n, n);
    p.c = Eigen::VectorXd::Zero(n);
    p.A_eq = SpMat(0, n);
    p.b_eq = Eigen::VectorXd(0);
    p.A_in = SpMat(0, n);
    p.in_lower = Eigen::VectorXd(0);
    p.in_upper = Eigen::VectorXd(0);
    p.lower = Eigen::VectorXd::Constant(n, -kInf);
    p.upper = Eigen::VectorXd::Constant(n, kInf);
    return p;
}

QpProblem parabola_above_one() {
    QpProblem p = empty_problem(1);
    p.Q.insert(0, 0) = 2.0;
    p.lower[0] = 1.0;
    return p;
}

QpProblem shifted_circle_on_line() {
    // min (x-3)^2 + (y-2)^2 s.t. x + y = 4; optimum (2.5, 1.5)
    QpProblem p = empty_problem(2);
    p.Q.insert(0, 0) = 2.0;
    p.Q.insert(1, 1) = 2.0;
    p.c << -6.0, -4.0;
    p.A_eq = SpMat(1, 2);
    p.A_eq.insert(0, 0) = 1.0;
    p.A_eq.insert(0, 1) = 1.0;
    p.b_eq = Eigen::VectorXd::Constant(1, 4.0);
    return p;
}

// Random strictly convex problem with a known KKT point: pick the optimum
// and multipliers first, then derive the linear cost.
struct Constructed {
    QpProblem prob;
    Eigen::VectorXd x_star;
};

Constructed random_constructed(std::mt19937_64& rng, int n, int m_eq) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return gauss(rng); });
    Eigen::MatrixXd qd = m.transpose() * m + Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd ad = Eigen::MatrixXd::NullaryExpr(m_eq, n, [&]() { return gauss(rng); });
    Eigen::VectorXd xs = Eigen::VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });
    Eigen::VectorXd ys = Eigen::VectorXd::NullaryExpr(m_eq, [&]() { return gauss(rng); });
    Constructed out;
    out.prob = empty_problem(n);
    out.prob.Q = qd.sparseView();
    out.prob.c = -(qd * xs + ad.transpose() * ys);
    out.prob.A_eq = ad.sparseView();
    out.prob.b_eq = ad * xs;
    // generous inactive box so the bounds exist but do not bind
    out.prob.lower = xs.array() - 10.0;
    out.prob.upper = xs.array() + 10.0;
    out.x_star = xs;
    return out;
}

}  // namespace

TEST_CASE("parabola against a lower bound") {
    const QpSolution s = solve_qp(parabola_above_one());
    CHECK(s.status == QpStatus::optimal);
    CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(s.objective_value == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("analytic equality-constrained optimum") {
    const QpProblem p = shifted_circle_on_line();
    const QpSolution s = solve_qp(p, 1e-9, 1e-9);
    CHECK(s.status == QpStatus::optimal);
    CHECK(s.x[0] == doctest::Approx(2.5).epsilon(1e-8));
    CHECK(s.x[1] == doctest::Approx(1.5).epsilon(1e-8));

    const KktResiduals at_opt = kkt_residuals(p, s.x, s.y);
    CHECK(at_opt.stationarity < 1e-9);
    CHECK(at_opt.primal < 1e-9);
    CHECK(at_opt.complementarity < 1e-9);

    Eigen::VectorXd x_perturbed = s.x;
    x_perturbed[0] += 0.1;
    const KktResiduals off = kkt_residuals(p, x_perturbed, s.y);
    CHECK(off.stationarity > 0.0);
}

TEST_CASE("crossed inequality rows are reported infeasible") {
    QpProblem p = empty_problem(1);
    p.Q.insert(0, 0) = 2.0;
    p.A_in = SpMat(2, 1);
    p.A_in.insert(0, 0) = 1.0;
    p.A_in.insert(1, 0) = 1.0;
    p.in_lower = Eigen::VectorXd(2);
    p.in_lower << 2.0, -kInf;
    p.in_upper = Eigen::VectorXd(2);
    p.in_upper << kInf, 1.0;
    const QpSolution s = solve_qp(p);
    CHECK(s.status == QpStatus::infeasible);
}

TEST_CASE("unconstrained parabola has zero residuals at the origin") {
    QpProblem p = empty_problem(1);
    p.Q.insert(0, 0) = 2.0;
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(1);  // one stacked bound row
    const KktResiduals r = kkt_residuals(p, x, y);
    CHECK(r.stationarity == 0.0);
    CHECK(r.primal == 0.0);
    CHECK(r.complementarity == 0.0);
}

TEST_CASE("constructed optima are recovered") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 25; ++trial) {
        const Constructed c = random_constructed(rng, 10 + static_cast<int>(rng() % 30), 3 + static_cast<int>(rng() % 8));
        const QpSolution s = solve_qp(c.prob);
        REQUIRE(s.status == QpStatus::optimal);
        const double rel = (s.x - c.x_star).norm() / std::max(1.0, c.x_star.norm());
        CHECK(rel < 1e-5);
    }
}

TEST_CASE("returned objective beats random feasible points") {
    std::mt19937_64 rng(103);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // box-constrained strictly convex problem; feasible points sampled in the box
    QpProblem p = empty_problem(6);
    Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(6, 6, [&]() { return gauss(rng); });
    Eigen::MatrixXd qd = m.transpose() * m + Eigen::MatrixXd::Identity(6, 6);
    p.Q = qd.sparseView();
    p.c = Eigen::VectorXd::NullaryExpr(6, [&]() { return gauss(rng); });
    p.lower = Eigen::VectorXd::Constant(6, -0.3);
    p.upper = Eigen::VectorXd::Constant(6, 0.7);
    const QpSolution s = solve_qp(p);
    REQUIRE(s.status == QpStatus::optimal);
    auto objective = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(qd * x) + p.c.dot(x); };
    std::uniform_real_distribution<double> in_box(-0.3, 0.7);
    for (int k = 0; k < 500; ++k) {
        const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(6, [&]() { return in_box(rng); });
        CHECK(objective(x) >= s.objective_value - 1e-7 * std::max(1.0, std::abs(s.objective_value)));
    }
}

TEST_CASE("mixed-constraint problems satisfy the optimality conditions on return") {
    std::mt19937_64 rng(999);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> dim(3, 25);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dim(rng);
        const int me = static_cast<int>(rng() % (n / 2 + 1));
        const int mi = static_cast<int>(rng() % n);
        Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return gauss(rng); });
        Eigen::MatrixXd qd = m.transpose() * m + 0.1 * Eigen::MatrixXd::Identity(n, n);
        QpProblem p = empty_problem(n);
        p.Q = qd.sparseView();
        p.c = Eigen::VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });
        Eigen::MatrixXd ae = Eigen::MatrixXd::NullaryExpr(me, n, [&]() { return gauss(rng); });
        const Eigen::VectorXd x0 = Eigen::VectorXd::NullaryExpr(n, [&]() { return 0.3 * gauss(rng); });
        p.A_eq = ae.sparseView();
        p.b_eq = ae * x0;  // feasible by construction
        Eigen::MatrixXd ai = Eigen::MatrixXd::NullaryExpr(mi, n, [&]() { return gauss(rng); });
        p.A_in = ai.sparseView();
        const Eigen::VectorXd mid = ai * x0;
        p.in_lower = mid.array() - std::abs(gauss(rng)) - 0.05;
        p.in_upper = mid.array() + std::abs(gauss(rng)) + 0.05;
        p.lower = x0.array() - 0.4;  // tight box, frequently active
        p.upper = x0.array() + 0.4;
        const QpSolution s = solve_qp(p);
        REQUIRE(s.status == QpStatus::optimal);
        const KktResiduals r = kkt_residuals(p, s.x, s.y);
        const double scale = std::max(1.0, s.x.cwiseAbs().maxCoeff());
        CHECK(r.stationarity / scale < 1e-5);
        CHECK(r.primal / scale < 1e-5);
        CHECK(r.complementarity / scale < 1e-5);
    }
}

TEST_CASE("scaling the objective leaves the argmin in place") {
    const QpProblem p = shifted_circle_on_line();
    QpProblem scaled = p;
    scaled.Q = SpMat(p.Q * 37.5);
    scaled.c = p.c * 37.5;
    const QpSolution a = solve_qp(p, 1e-9, 1e-9);
    const QpSolution b = solve_qp(scaled, 1e-9, 1e-9);
    REQUIRE(a.status == QpStatus::optimal);
    REQUIRE(b.status == QpStatus::optimal);
    CHECK(b.x[0] == doctest::Approx(a.x[0]).epsilon(1e-7));
    CHECK(b.x[1] == doctest::Approx(a.x[1]).epsilon(1e-7));
    CHECK(b.objective_value == doctest::Approx(37.5 * a.objective_value).epsilon(1e-7));
}

TEST_CASE("bound-only updates reuse the factorization and match fresh solves") {
    QpProblem p = parabola_above_one();
    QpSolver solver(p);
    const QpSolution first = solver.solve();
    REQUIRE(first.status == QpStatus::optimal);
    CHECK(first.x[0] == doctest::Approx(1.0).epsilon(1e-8));

    Eigen::VectorXd lower = Eigen::VectorXd::Constant(1, 2.5);
    Eigen::VectorXd upper = Eigen::VectorXd::Constant(1, kInf);
    solver.update_variable_bounds(lower, upper);
    const QpSolution second = solver.solve();
    REQUIRE(second.status == QpStatus::optimal);

    QpProblem fresh = parabola_above_one();
    fresh.lower[0] = 2.5;
    const QpSolution direct = solve_qp(fresh);
    CHECK(second.x[0] == doctest::Approx(direct.x[0]).epsilon(1e-9));
    CHECK(second.objective_value == doctest::Approx(direct.objective_value).epsilon(1e-9));
}

TEST_CASE("negative curvature is rejected up front") {
    QpProblem p = empty_problem(2);
    p.Q.insert(0, 0) = 1.0;
    p.Q.insert(1, 1) = -1.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("asymmetric objective is rejected") {
    QpProblem p = empty_problem(2);
    p.Q.insert(0, 1) = 1.0;  // no mirror entry
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("problem dump emits every section") {
    std::ostringstream out;
    dump_problem(shifted_circle_on_line(), out);
    const std::string text = out.str();
    for (const char* section : {"[Q]", "[c]", "[A_EQ]", "[B_EQ]", "[A_IN]", "[LOWER]", "[UPPER]"}) {
        CAPTURE(section);
        CHECK(text.find(section) != std::string::npos);
    }
}
