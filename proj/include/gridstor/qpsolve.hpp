#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <iosfwd>
#include <limits>

namespace gridstor {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Convex QP:  minimize 1/2 x'Qx + c'x
///             s.t.      A_eq x = b_eq
///                       in_lower <= A_in x <= in_upper
///                       lower <= x <= upper
struct QpProblem {
    int n = 0;
    Eigen::SparseMatrix<double> Q;  // n x n, symmetric PSD
    Eigen::VectorXd c;
    Eigen::SparseMatrix<double> A_eq;
    Eigen::VectorXd b_eq;
    Eigen::SparseMatrix<double> A_in;
    Eigen::VectorXd in_lower, in_upper;
    Eigen::VectorXd lower, upper;

    int m_eq() const { return static_cast<int>(A_eq.rows()); }
    int m_in() const { return static_cast<int>(A_in.rows()); }

    /// Dimension, symmetry and curvature checks; negative curvature surfaced
    /// by the factorization probe is rejected. Throws ValidationError.
    void validate() const;
};

struct QpSettings {
    double eps_abs = 1e-6;
    double eps_rel = 1e-6;
    int max_iter = 50000;
    double over_relaxation = 1.6;
    double sigma = 1e-6;
    double rho0 = 0.1;
    double rho_eq_scale = 1e3;   // stiffer penalty on equality rows
    int check_interval = 25;     // residual check and penalty adaptation cadence
    int divergence_window = 1000;
    double eps_infeas = 1e-7;
    bool polish = true;
    bool scaling = true;
    int scaling_iterations = 10;
};

enum class QpStatus { optimal, infeasible, max_iter };

const char* to_string(QpStatus status);

struct QpSolution {
    Eigen::VectorXd x;
    /// Duals for the stacked rows [A_eq; A_in; I]; positive entries push at
    /// an upper bound, negative at a lower bound.
    Eigen::VectorXd y;
    QpStatus status = QpStatus::max_iter;
    double primal_residual = kInf;
    double dual_residual = kInf;
    double objective_value = 0.0;
    int iterations = 0;
};

/// Operator-splitting solver with over-relaxation, Ruiz equilibration,
/// adaptive penalty and an active-set polish step. The KKT factorization is
/// kept between solves, so bound-only updates re-solve cheaply.
class QpSolver {
  public:
    explicit QpSolver(QpProblem prob, QpSettings settings = {});

    QpSolution solve();

    /// Replace right-hand sides and bounds without touching the matrices;
    /// the factorization is reused.
    void update_bounds(const Eigen::VectorXd& b_eq, const Eigen::VectorXd& in_lower,
                       const Eigen::VectorXd& in_upper, const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper);
    void update_variable_bounds(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

    void warm_start(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

    const QpProblem& problem() const { return prob_; }

  private:
    void equilibrate();
    void build_rho();
    void factorize();
    void compute_unscaled_iterates(Eigen::VectorXd& x, Eigen::VectorXd& z, Eigen::VectorXd& y) const;
    bool primal_infeasibility_certificate(const Eigen::VectorXd& dy) const;
    void polish(QpSolution& sol) const;

    QpProblem prob_;  // original, unscaled
    QpSettings st_;
    int m_ = 0;

    // scaled working problem
    Eigen::SparseMatrix<double> P_;
    Eigen::VectorXd q_;
    Eigen::SparseMatrix<double> A_;   // stacked [A_eq; A_in; I]
    Eigen::SparseMatrix<double> At_;  // transpose, kept for the hot loop
    Eigen::VectorXd l_, u_;
    Eigen::VectorXd d_, e_;  // variable / constraint scalings
    double cost_scale_ = 1.0;

    Eigen::VectorXd rho_, rho_inv_;
    double rho_bar_ = 0.1;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;

    // iterates (scaled space)
    Eigen::VectorXd x_, z_, y_;
    bool warm_ = false;
};

/// One-shot convenience wrapper.
QpSolution solve_qp(const QpProblem& prob, double eps_abs = 1e-6, double eps_rel = 1e-6,
                    int max_iter = 50000);

struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double complementarity = 0.0;
};

/// Residuals from the KKT definitions; all zero at an exact optimum.
/// y follows the stacked-row layout of QpSolution.
KktResiduals kkt_residuals(const QpProblem& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Debug dump in sparse triplet text (`row col value` sections).
void dump_problem(const QpProblem& prob, std::ostream& out);

}  // namespace gridstor
