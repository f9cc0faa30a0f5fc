#include "gridstor/qpsolve.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include <Eigen/SparseLU>

#include "gridstor/netmodel.hpp"

namespace gridstor {

namespace {

double inf_norm(const Eigen::VectorXd& v) {
    return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// Column-wise infinity norms accumulated into `out` (size = cols).
void accumulate_col_norms(const Eigen::SparseMatrix<double>& mat, Eigen::VectorXd& out) {
    for (int k = 0; k < mat.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(mat, k); it; ++it) {
            out[it.col()] = std::max(out[it.col()], std::abs(it.value()));
        }
    }
}

void accumulate_row_norms(const Eigen::SparseMatrix<double>& mat, Eigen::VectorXd& out) {
    for (int k = 0; k < mat.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(mat, k); it; ++it) {
            out[it.row()] = std::max(out[it.row()], std::abs(it.value()));
        }
    }
}

void scale_rows_cols(Eigen::SparseMatrix<double>& mat, const Eigen::VectorXd& row_scale,
                     const Eigen::VectorXd& col_scale) {
    for (int k = 0; k < mat.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(mat, k); it; ++it) {
            it.valueRef() *= row_scale[it.row()] * col_scale[it.col()];
        }
    }
}

}  // namespace

const char* to_string(QpStatus status) {
    switch (status) {
        case QpStatus::optimal: return "optimal";
        case QpStatus::infeasible: return "infeasible";
        default: return "max_iter";
    }
}

void QpProblem::validate() const {
    if (n < 1) throw ValidationError("QP needs at least one variable");
    if (Q.rows() != n || Q.cols() != n || c.size() != n || lower.size() != n || upper.size() != n)
        throw ValidationError("QP objective/bounds dimensions inconsistent");
    if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != n))
        throw ValidationError("QP equality block dimensions inconsistent");
    if (A_in.rows() != in_lower.size() || A_in.rows() != in_upper.size() ||
        (A_in.rows() > 0 && A_in.cols() != n))
        throw ValidationError("QP inequality block dimensions inconsistent");

    // Symmetry.
    Eigen::SparseMatrix<double> diff = Eigen::SparseMatrix<double>(Q.transpose()) - Q;
    double qmax = 0.0;
    for (int k = 0; k < Q.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(Q, k); it; ++it)
            qmax = std::max(qmax, std::abs(it.value()));
    for (int k = 0; k < diff.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it)
            if (std::abs(it.value()) > 1e-9 * (1.0 + qmax))
                throw ValidationError("QP objective matrix is not symmetric");

    // Curvature probe: an indefinite Q shows up as a negative pivot.
    Eigen::SparseMatrix<double> probe = Q;
    Eigen::SparseMatrix<double> ident(n, n);
    ident.setIdentity();
    probe += (1e-10 * (1.0 + qmax)) * ident;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(probe);
    if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd d = ldlt.vectorD();
        const double dmax = inf_norm(d);
        if (d.minCoeff() < -1e-7 * (1.0 + dmax))
            throw ValidationError("QP objective matrix has negative curvature");
    } else {
        throw ValidationError("QP objective matrix failed the PSD factorization probe");
    }
}

QpSolver::QpSolver(QpProblem prob, QpSettings settings) : prob_(std::move(prob)), st_(settings) {
    prob_.validate();
    const int n = prob_.n;
    m_ = prob_.m_eq() + prob_.m_in() + n;

    // Stack [A_eq; A_in; I].
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(prob_.A_eq.nonZeros() + prob_.A_in.nonZeros() + n);
    for (int k = 0; k < prob_.A_eq.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(prob_.A_eq, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    const int off_in = prob_.m_eq();
    for (int k = 0; k < prob_.A_in.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(prob_.A_in, k); it; ++it)
            trips.emplace_back(off_in + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    const int off_bnd = off_in + prob_.m_in();
    for (int j = 0; j < n; ++j) trips.emplace_back(off_bnd + j, j, 1.0);

    A_.resize(m_, n);
    A_.setFromTriplets(trips.begin(), trips.end());
    P_ = prob_.Q;
    q_ = prob_.c;

    equilibrate();
    At_ = A_.transpose();
    rho_bar_ = st_.rho0;
    build_rho();
    factorize();
}

void QpSolver::equilibrate() {
    const int n = prob_.n;
    d_ = Eigen::VectorXd::Ones(n);
    e_ = Eigen::VectorXd::Ones(m_);
    cost_scale_ = 1.0;

    if (st_.scaling) {
        for (int pass = 0; pass < st_.scaling_iterations; ++pass) {
            Eigen::VectorXd col_norm = Eigen::VectorXd::Zero(n);
            accumulate_col_norms(P_, col_norm);
            accumulate_col_norms(A_, col_norm);
            Eigen::VectorXd row_norm = Eigen::VectorXd::Zero(m_);
            accumulate_row_norms(A_, row_norm);

            Eigen::VectorXd dd(n), de(m_);
            for (int j = 0; j < n; ++j) dd[j] = col_norm[j] > 1e-12 ? 1.0 / std::sqrt(col_norm[j]) : 1.0;
            for (int i = 0; i < m_; ++i) de[i] = row_norm[i] > 1e-12 ? 1.0 / std::sqrt(row_norm[i]) : 1.0;

            scale_rows_cols(P_, dd, dd);
            scale_rows_cols(A_, de, dd);
            q_ = dd.cwiseProduct(q_);
            d_ = d_.cwiseProduct(dd);
            e_ = e_.cwiseProduct(de);

            // Cost normalization.
            Eigen::VectorXd pcol = Eigen::VectorXd::Zero(n);
            accumulate_col_norms(P_, pcol);
            const double pmean = n > 0 ? pcol.sum() / n : 0.0;
            const double denom = std::max(pmean, inf_norm(q_));
            if (denom > 1e-12) {
                const double g = 1.0 / denom;
                P_ *= g;
                q_ *= g;
                cost_scale_ *= g;
            }
        }
    }

    // Scaled stacked bounds. e > 0, so infinities survive.
    l_.resize(m_);
    u_.resize(m_);
    const int off_in = prob_.m_eq();
    const int off_bnd = off_in + prob_.m_in();
    for (int i = 0; i < prob_.m_eq(); ++i) l_[i] = u_[i] = e_[i] * prob_.b_eq[i];
    for (int i = 0; i < prob_.m_in(); ++i) {
        l_[off_in + i] = e_[off_in + i] * prob_.in_lower[i];
        u_[off_in + i] = e_[off_in + i] * prob_.in_upper[i];
    }
    for (int j = 0; j < prob_.n; ++j) {
        l_[off_bnd + j] = e_[off_bnd + j] * prob_.lower[j];
        u_[off_bnd + j] = e_[off_bnd + j] * prob_.upper[j];
    }
}

void QpSolver::build_rho() {
    rho_.resize(m_);
    rho_inv_.resize(m_);
    for (int i = 0; i < m_; ++i) {
        double r = rho_bar_;
        if (std::isfinite(l_[i]) && std::isfinite(u_[i]) && l_[i] == u_[i]) r *= st_.rho_eq_scale;
        r = std::clamp(r, 1e-6, 1e6);
        rho_[i] = r;
        rho_inv_[i] = 1.0 / r;
    }
}

void QpSolver::factorize() {
    Eigen::SparseMatrix<double> scaled_a = A_;
    const Eigen::VectorXd sqrt_rho = rho_.cwiseSqrt();
    for (int k = 0; k < scaled_a.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(scaled_a, k); it; ++it)
            it.valueRef() *= sqrt_rho[it.row()];
    Eigen::SparseMatrix<double> ident(prob_.n, prob_.n);
    ident.setIdentity();
    Eigen::SparseMatrix<double> m =
        P_ + st_.sigma * ident + Eigen::SparseMatrix<double>(scaled_a.transpose() * scaled_a);
    ldlt_.compute(m);
    if (ldlt_.info() != Eigen::Success)
        throw std::runtime_error("QP KKT factorization failed");
}

void QpSolver::update_bounds(const Eigen::VectorXd& b_eq, const Eigen::VectorXd& in_lower,
                             const Eigen::VectorXd& in_upper, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper) {
    if (b_eq.size() != prob_.m_eq() || in_lower.size() != prob_.m_in() ||
        in_upper.size() != prob_.m_in() || lower.size() != prob_.n || upper.size() != prob_.n)
        throw ValidationError("update_bounds dimension mismatch");
    prob_.b_eq = b_eq;
    prob_.in_lower = in_lower;
    prob_.in_upper = in_upper;
    prob_.lower = lower;
    prob_.upper = upper;
    const int off_in = prob_.m_eq();
    const int off_bnd = off_in + prob_.m_in();
    for (int i = 0; i < prob_.m_eq(); ++i) l_[i] = u_[i] = e_[i] * b_eq[i];
    for (int i = 0; i < prob_.m_in(); ++i) {
        l_[off_in + i] = e_[off_in + i] * in_lower[i];
        u_[off_in + i] = e_[off_in + i] * in_upper[i];
    }
    for (int j = 0; j < prob_.n; ++j) {
        l_[off_bnd + j] = e_[off_bnd + j] * lower[j];
        u_[off_bnd + j] = e_[off_bnd + j] * upper[j];
    }
}

void QpSolver::update_variable_bounds(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    update_bounds(prob_.b_eq, prob_.in_lower, prob_.in_upper, lower, upper);
}

void QpSolver::warm_start(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != prob_.n || y.size() != m_) throw ValidationError("warm_start dimension mismatch");
    x_ = x.cwiseQuotient(d_);
    y_ = cost_scale_ * y.cwiseQuotient(e_);
    z_ = (A_ * x_).cwiseMax(l_).cwiseMin(u_);
    warm_ = true;
}

void QpSolver::compute_unscaled_iterates(Eigen::VectorXd& x, Eigen::VectorXd& z, Eigen::VectorXd& y) const {
    x = d_.cwiseProduct(x_);
    z = z_.cwiseQuotient(e_);
    y = e_.cwiseProduct(y_) / cost_scale_;
}

bool QpSolver::primal_infeasibility_certificate(const Eigen::VectorXd& dy) const {
    const double norm = inf_norm(dy);
    if (norm < 1e-14) return false;
    const Eigen::VectorXd dyn = dy / norm;

    // A' dy must vanish along the diverging ray.
    Eigen::VectorXd aty = Eigen::VectorXd::Zero(prob_.n);
    const int off_in = prob_.m_eq();
    const int off_bnd = off_in + prob_.m_in();
    aty += prob_.A_eq.transpose() * dyn.segment(0, prob_.m_eq());
    aty += prob_.A_in.transpose() * dyn.segment(off_in, prob_.m_in());
    aty += dyn.segment(off_bnd, prob_.n);
    if (inf_norm(aty) > st_.eps_infeas) return false;

    // Support function of the bound set must be negative along the ray.
    double support = 0.0;
    auto bound_at = [&](int i, bool up) -> double {
        if (i < off_in) return prob_.b_eq[i];
        if (i < off_bnd) return up ? prob_.in_upper[i - off_in] : prob_.in_lower[i - off_in];
        return up ? prob_.upper[i - off_bnd] : prob_.lower[i - off_bnd];
    };
    for (int i = 0; i < m_; ++i) {
        if (dyn[i] > st_.eps_infeas) {
            const double ub = bound_at(i, true);
            if (!std::isfinite(ub)) return false;
            support += ub * dyn[i];
        } else if (dyn[i] < -st_.eps_infeas) {
            const double lb = bound_at(i, false);
            if (!std::isfinite(lb)) return false;
            support += lb * dyn[i];
        }
    }
    return support <= -st_.eps_infeas;
}

QpSolution QpSolver::solve() {
    const int n = prob_.n;
    QpSolution sol;
    sol.x = Eigen::VectorXd::Zero(n);
    sol.y = Eigen::VectorXd::Zero(m_);

    // Trivially crossed bounds.
    for (int i = 0; i < m_; ++i) {
        if (l_[i] > u_[i]) {
            sol.status = QpStatus::infeasible;
            return sol;
        }
    }

    // Restore the baseline penalty so repeated solves are history-independent.
    if (rho_bar_ != st_.rho0) {
        rho_bar_ = st_.rho0;
        build_rho();
        factorize();
    }

    if (!warm_) {
        x_ = Eigen::VectorXd::Zero(n);
        y_ = Eigen::VectorXd::Zero(m_);
        z_ = Eigen::VectorXd::Zero(m_).cwiseMax(l_).cwiseMin(u_);
    }
    warm_ = false;

    Eigen::VectorXd y_prev_check;
    {
        Eigen::VectorXd xu, zu, yu;
        compute_unscaled_iterates(xu, zu, yu);
        y_prev_check = yu;
    }
    double window_best = kInf, prev_window_best = kInf;
    double window_y_norm0 = 0.0;
    int iter = 0;
    QpStatus status = QpStatus::max_iter;
    double rp = kInf, rd = kInf;

    Eigen::VectorXd rhs(n), xt(n), zt(m_), z_pre(m_);

    for (iter = 1; iter <= st_.max_iter; ++iter) {
        rhs = st_.sigma * x_ - q_ + At_ * (rho_.cwiseProduct(z_) - y_);
        xt = ldlt_.solve(rhs);
        zt.noalias() = A_ * xt;
        x_ = st_.over_relaxation * xt + (1.0 - st_.over_relaxation) * x_;
        z_pre = st_.over_relaxation * zt + (1.0 - st_.over_relaxation) * z_;
        Eigen::VectorXd z_new = (z_pre + rho_inv_.cwiseProduct(y_)).cwiseMax(l_).cwiseMin(u_);
        y_ += rho_.cwiseProduct(z_pre - z_new);
        z_ = z_new;

        if (iter % st_.check_interval != 0 && iter != st_.max_iter) continue;

        Eigen::VectorXd xu, zu, yu;
        compute_unscaled_iterates(xu, zu, yu);
        const Eigen::VectorXd ax = (A_ * x_).cwiseQuotient(e_);
        const Eigen::VectorXd qx = prob_.Q * xu;
        const Eigen::VectorXd aty = (At_ * y_).cwiseQuotient(d_) / cost_scale_;

        rp = inf_norm(ax - zu);
        Eigen::VectorXd dual_vec = qx + prob_.c + aty;
        rd = inf_norm(dual_vec);
        const double eps_p = st_.eps_abs + st_.eps_rel * std::max(inf_norm(ax), inf_norm(zu));
        const double eps_d =
            st_.eps_abs + st_.eps_rel * std::max({inf_norm(qx), inf_norm(prob_.c), inf_norm(aty)});
        if (rp <= eps_p && rd <= eps_d) {
            status = QpStatus::optimal;
            break;
        }

        if (primal_infeasibility_certificate(yu - y_prev_check)) {
            status = QpStatus::infeasible;
            break;
        }
        y_prev_check = yu;

        // Penalty adaptation on the scaled residual balance.
        const double rp_rel = rp / std::max({inf_norm(ax), inf_norm(zu), 1e-10});
        const double rd_rel = rd / std::max({inf_norm(qx), inf_norm(prob_.c), inf_norm(aty), 1e-10});
        const double proposed = std::clamp(rho_bar_ * std::sqrt(rp_rel / std::max(rd_rel, 1e-16)), 1e-6, 1e6);
        if (proposed > 5.0 * rho_bar_ || proposed < 0.2 * rho_bar_) {
            rho_bar_ = proposed;
            build_rho();
            factorize();
        }

        // Stall over a long window with growing duals reads as infeasible.
        window_best = std::min(window_best, rp);
        if (iter % st_.divergence_window == 0) {
            const double y_norm = inf_norm(yu);
            if (std::isfinite(prev_window_best) && window_best > 0.95 * prev_window_best &&
                window_best > 1e3 * eps_p && y_norm > 2.0 * window_y_norm0 && window_y_norm0 > 0.0) {
                status = QpStatus::infeasible;
                break;
            }
            prev_window_best = window_best;
            window_best = kInf;
            window_y_norm0 = y_norm;
        }
    }

    Eigen::VectorXd xu, zu, yu;
    compute_unscaled_iterates(xu, zu, yu);
    sol.x = xu;
    sol.y = yu;
    sol.status = status;
    sol.iterations = std::min(iter, st_.max_iter);
    sol.primal_residual = rp;
    sol.dual_residual = rd;
    sol.objective_value = 0.5 * xu.dot(prob_.Q * xu) + prob_.c.dot(xu);

    if (status == QpStatus::optimal && st_.polish) polish(sol);
    return sol;
}

void QpSolver::polish(QpSolution& sol) const {
    const int n = prob_.n;
    const int off_in = prob_.m_eq();
    const int off_bnd = off_in + prob_.m_in();

    // Active rows: equalities always, inequalities by dual sign.
    std::vector<int> act_rows;
    std::vector<double> act_rhs;
    for (int i = 0; i < prob_.m_eq(); ++i) {
        act_rows.push_back(i);
        act_rhs.push_back(prob_.b_eq[i]);
    }
    for (int i = off_in; i < m_; ++i) {
        const double lo = i < off_bnd ? prob_.in_lower[i - off_in] : prob_.lower[i - off_bnd];
        const double hi = i < off_bnd ? prob_.in_upper[i - off_in] : prob_.upper[i - off_bnd];
        if (sol.y[i] > 1e-10 && std::isfinite(hi)) {
            act_rows.push_back(i);
            act_rhs.push_back(hi);
        } else if (sol.y[i] < -1e-10 && std::isfinite(lo)) {
            act_rows.push_back(i);
            act_rhs.push_back(lo);
        }
    }
    const int ma = static_cast<int>(act_rows.size());

    // KKT on the active set with tiny regularization, then refine against
    // the unregularized system.
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < prob_.Q.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(prob_.Q, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    // Row extraction from the stacked structure.
    Eigen::SparseMatrix<double, Eigen::RowMajor> a_eq_r = prob_.A_eq;
    Eigen::SparseMatrix<double, Eigen::RowMajor> a_in_r = prob_.A_in;
    for (int r = 0; r < ma; ++r) {
        const int i = act_rows[r];
        if (i < off_in) {
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a_eq_r, i); it; ++it) {
                trips.emplace_back(n + r, static_cast<int>(it.col()), it.value());
                trips.emplace_back(static_cast<int>(it.col()), n + r, it.value());
            }
        } else if (i < off_bnd) {
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a_in_r, i - off_in); it; ++it) {
                trips.emplace_back(n + r, static_cast<int>(it.col()), it.value());
                trips.emplace_back(static_cast<int>(it.col()), n + r, it.value());
            }
        } else {
            trips.emplace_back(n + r, i - off_bnd, 1.0);
            trips.emplace_back(i - off_bnd, n + r, 1.0);
        }
    }
    const double delta = 1e-9;
    for (int j = 0; j < n; ++j) trips.emplace_back(j, j, delta);
    for (int r = 0; r < ma; ++r) trips.emplace_back(n + r, n + r, -delta);

    Eigen::SparseMatrix<double> kkt(n + ma, n + ma);
    kkt.setFromTriplets(trips.begin(), trips.end());

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(kkt);
    if (lu.info() != Eigen::Success) return;

    Eigen::VectorXd rhs(n + ma);
    rhs.head(n) = -prob_.c;
    for (int r = 0; r < ma; ++r) rhs[n + r] = act_rhs[r];

    // K0 is the unregularized KKT; two refinement passes cancel the delta bias.
    Eigen::SparseMatrix<double> kkt0 = kkt;
    for (int j = 0; j < n; ++j) kkt0.coeffRef(j, j) -= delta;
    for (int r = 0; r < ma; ++r) kkt0.coeffRef(n + r, n + r) += delta;

    Eigen::VectorXd sol_vec = lu.solve(rhs);
    for (int pass = 0; pass < 3; ++pass) {
        Eigen::VectorXd resid = rhs - kkt0 * sol_vec;
        sol_vec += lu.solve(resid);
    }

    Eigen::VectorXd x_pol = sol_vec.head(n);
    Eigen::VectorXd y_pol = Eigen::VectorXd::Zero(m_);
    for (int r = 0; r < ma; ++r) y_pol[act_rows[r]] = sol_vec[n + r];

    // Accept only when the polished point is at least as good on both residuals.
    const KktResiduals before = kkt_residuals(prob_, sol.x, sol.y);
    const KktResiduals after = kkt_residuals(prob_, x_pol, y_pol);
    const double before_worst = std::max(before.stationarity, before.primal);
    const double after_worst = std::max(after.stationarity, after.primal);
    if (after_worst <= before_worst) {
        sol.x = x_pol;
        sol.y = y_pol;
        sol.primal_residual = after.primal;
        sol.dual_residual = after.stationarity;
        sol.objective_value = 0.5 * x_pol.dot(prob_.Q * x_pol) + prob_.c.dot(x_pol);
    }
}

QpSolution solve_qp(const QpProblem& prob, double eps_abs, double eps_rel, int max_iter) {
    QpSettings st;
    st.eps_abs = eps_abs;
    st.eps_rel = eps_rel;
    st.max_iter = max_iter;
    QpSolver solver(prob, st);
    return solver.solve();
}

KktResiduals kkt_residuals(const QpProblem& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const int n = prob.n;
    const int off_in = prob.m_eq();
    const int off_bnd = off_in + prob.m_in();
    const int m = off_bnd + n;
    if (x.size() != n || y.size() != m) throw ValidationError("kkt_residuals dimension mismatch");

    KktResiduals res;
    Eigen::VectorXd grad = prob.Q * x + prob.c;
    grad += prob.A_eq.transpose() * y.segment(0, prob.m_eq());
    grad += prob.A_in.transpose() * y.segment(off_in, prob.m_in());
    grad += y.segment(off_bnd, n);
    res.stationarity = inf_norm(grad);

    Eigen::VectorXd ax_eq = prob.A_eq * x;
    Eigen::VectorXd ax_in = prob.A_in * x;
    auto row_value = [&](int i) {
        if (i < off_in) return ax_eq[i];
        if (i < off_bnd) return ax_in[i - off_in];
        return x[i - off_bnd];
    };
    auto row_bounds = [&](int i) -> std::pair<double, double> {
        if (i < off_in) return {prob.b_eq[i], prob.b_eq[i]};
        if (i < off_bnd) return {prob.in_lower[i - off_in], prob.in_upper[i - off_in]};
        return {prob.lower[i - off_bnd], prob.upper[i - off_bnd]};
    };
    for (int i = 0; i < m; ++i) {
        const double a = row_value(i);
        const auto [lo, hi] = row_bounds(i);
        res.primal = std::max({res.primal, lo - a, a - hi});
        const double yp = std::max(y[i], 0.0);
        const double ym = std::max(-y[i], 0.0);
        res.complementarity =
            std::max(res.complementarity, std::isfinite(hi) ? yp * std::abs(hi - a) : yp);
        res.complementarity =
            std::max(res.complementarity, std::isfinite(lo) ? ym * std::abs(a - lo) : ym);
    }
    res.primal = std::max(res.primal, 0.0);
    return res;
}

void dump_problem(const QpProblem& prob, std::ostream& out) {
    auto dump_matrix = [&out](const char* name, const Eigen::SparseMatrix<double>& mat) {
        out << "[" << name << "] " << mat.rows() << " " << mat.cols() << "\n";
        for (int k = 0; k < mat.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(mat, k); it; ++it)
                out << it.row() << " " << it.col() << " " << it.value() << "\n";
    };
    auto dump_vector = [&out](const char* name, const Eigen::VectorXd& v) {
        out << "[" << name << "] " << v.size() << "\n";
        for (int i = 0; i < v.size(); ++i) out << i << " " << v[i] << "\n";
    };
    out << "n " << prob.n << "\n";
    dump_matrix("Q", prob.Q);
    dump_vector("c", prob.c);
    dump_matrix("A_EQ", prob.A_eq);
    dump_vector("B_EQ", prob.b_eq);
    dump_matrix("A_IN", prob.A_in);
    dump_vector("IN_LOWER", prob.in_lower);
    dump_vector("IN_UPPER", prob.in_upper);
    dump_vector("LOWER", prob.lower);
    dump_vector("UPPER", prob.upper);
}

}  // namespace gridstor
