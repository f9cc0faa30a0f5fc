#include "gridstor/sizing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>

namespace gridstor {

void SizingProblem::validate() const {
    if (!net || !profiles || !grid) throw ValidationError("sizing problem missing network/profiles/grid");
    grid->validate();
    if (profiles->n_days() != grid->n_days() || profiles->hours_per_day() != grid->hours_per_day ||
        profiles->n_buses() != net->n_buses())
        throw ValidationError("profile dimensions do not match grid/network");
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (net->bus_index(candidates[i]) < 0)
            throw ValidationError("candidate bus " + std::to_string(candidates[i]) + " not in network");
        if (i > 0 && candidates[i] <= candidates[i - 1])
            throw ValidationError("candidate bus ids must be strictly ascending");
    }
    if (n_ess != kFreeCount && (n_ess < 0 || n_ess > static_cast<int>(candidates.size())))
        throw ValidationError("n_ess must be in [0, |candidates|] or free");
    if (!candidates.empty() && !(capacity_bound_kwh > 0.0))
        throw ValidationError("capacity bound must be positive");
    if (aggregate_cap_kwh && *aggregate_cap_kwh < 0.0)
        throw ValidationError("aggregate capacity must be non-negative");
    if (use_rate_link && !(rate_link_hours > 0.0))
        throw ValidationError("rate link hours must be positive");
    if (!(ess_defaults.eta_plus > 0.0 && ess_defaults.eta_plus <= 1.0) ||
        !(ess_defaults.eta_minus > 0.0 && ess_defaults.eta_minus <= 1.0))
        throw ValidationError("efficiencies must lie in (0, 1]");
    if (ess_defaults.e_min < 0.0) throw ValidationError("e_min must be >= 0");
    if (!use_rate_link && (ess_defaults.p_max_charge < 0.0 || ess_defaults.p_max_discharge < 0.0))
        throw ValidationError("fixed rate limits must be >= 0");
}

int BinaryAssignment::count_fixed_ones() const {
    int ones = 0;
    for (const auto& v : values) ones += v && *v == 1 ? 1 : 0;
    return ones;
}

bool BinaryAssignment::fully_fixed() const {
    return std::all_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
}

namespace {

SizingLayout make_layout(const SizingProblem& prob) {
    SizingLayout lay;
    lay.n_days = prob.grid->n_days();
    lay.n_hours = prob.grid->hours_per_day;
    lay.n_lines = prob.net->n_lines();
    lay.n_buses = prob.net->n_buses();
    lay.n_cand = static_cast<int>(prob.candidates.size());
    const int dt = lay.n_days * lay.n_hours;
    lay.flow_p0 = 0;
    lay.flow_q0 = lay.flow_p0 + dt * lay.n_lines * kNumPhases;
    lay.volt0 = lay.flow_q0 + dt * lay.n_lines * kNumPhases;
    lay.chg0 = lay.volt0 + dt * lay.n_buses * kNumPhases;
    lay.dis0 = lay.chg0 + dt * lay.n_cand;
    lay.soc0 = lay.dis0 + dt * lay.n_cand;
    lay.e00 = lay.soc0 + dt * lay.n_cand;
    lay.cap0 = lay.e00 + lay.n_cand;
    lay.loc0 = lay.cap0 + lay.n_cand;
    lay.n_vars = lay.loc0 + lay.n_cand;
    return lay;
}

constexpr double kWattsPerKw = 1000.0;

}  // namespace

SizingQp build_qp(const SizingProblem& prob, const BinaryAssignment& binaries) {
    prob.validate();
    const Network& net = *prob.net;
    const ProfileSet& profiles = *prob.profiles;
    const TimeGrid& grid = *prob.grid;
    const SizingLayout lay = make_layout(prob);
    if (static_cast<int>(binaries.values.size()) != lay.n_cand)
        throw ValidationError("binary assignment size mismatch");
    if (prob.n_ess != kFreeCount && binaries.count_fixed_ones() > prob.n_ess)
        throw ValidationError("fixed assignment selects more buses than n_ess");

    const Topology topo = build_topology(net);
    // candidate index at each bus, -1 when none
    std::vector<int> cand_at(lay.n_buses, -1);
    for (int c = 0; c < lay.n_cand; ++c) cand_at[net.bus_index(prob.candidates[c])] = c;

    SizingQp out;
    out.layout = lay;
    QpProblem& qp = out.qp;
    qp.n = lay.n_vars;
    qp.c = Eigen::VectorXd::Zero(lay.n_vars);
    qp.lower = Eigen::VectorXd::Constant(lay.n_vars, -kInf);
    qp.upper = Eigen::VectorXd::Constant(lay.n_vars, kInf);

    // Objective: day-weighted quadratic losses on the flow variables, in kWh.
    std::vector<Eigen::Triplet<double>> q_trips;
    for (int d = 0; d < lay.n_days; ++d) {
        const double w = grid.days[d].weight_days * grid.delta_t;
        for (int t = 0; t < lay.n_hours; ++t) {
            for (int li = 0; li < lay.n_lines; ++li) {
                const Line& line = net.lines[li];
                for (int f = 0; f < kNumPhases; ++f) {
                    const double coef_p =
                        2.0 * w * kWattsPerKw * line.resistance[f] / (net.v_sub * net.v_sub);
                    const double coef_q = coef_p;  // same R weighting on p and q flows
                    q_trips.emplace_back(lay.flow_p(d, t, li, f), lay.flow_p(d, t, li, f), coef_p);
                    q_trips.emplace_back(lay.flow_q(d, t, li, f), lay.flow_q(d, t, li, f), coef_q);
                }
            }
        }
    }
    qp.Q.resize(lay.n_vars, lay.n_vars);
    qp.Q.setFromTriplets(q_trips.begin(), q_trips.end());

    std::vector<Eigen::Triplet<double>> eq_trips;
    std::vector<double> eq_rhs;
    auto eq_row = [&eq_rhs]() { return static_cast<int>(eq_rhs.size()); };

    const double eta_p = prob.ess_defaults.eta_plus;
    const double eta_m = prob.ess_defaults.eta_minus;

    for (int d = 0; d < lay.n_days; ++d) {
        for (int t = 0; t < lay.n_hours; ++t) {
            for (int li = 0; li < lay.n_lines; ++li) {
                const int j = topo.child_bus[li];
                const int up = topo.upstream_bus[li];
                const Line& line = net.lines[li];
                const int cand = cand_at[j];
                for (int f = 0; f < kNumPhases; ++f) {
                    // p flow balance: p_li - sum(child flows) - (chg - dis) = load - pv
                    {
                        const int r = eq_row();
                        eq_trips.emplace_back(r, lay.flow_p(d, t, li, f), 1.0);
                        for (int cl : topo.child_lines[j])
                            eq_trips.emplace_back(r, lay.flow_p(d, t, cl, f), -1.0);
                        if (cand >= 0) {
                            eq_trips.emplace_back(r, lay.charge(d, t, cand), -1.0);
                            eq_trips.emplace_back(r, lay.discharge(d, t, cand), 1.0);
                        }
                        eq_rhs.push_back(profiles.p_load(d, t, j, f) - profiles.p_pv(d, t, j, f));
                    }
                    // q flow balance
                    {
                        const int r = eq_row();
                        eq_trips.emplace_back(r, lay.flow_q(d, t, li, f), 1.0);
                        for (int cl : topo.child_lines[j])
                            eq_trips.emplace_back(r, lay.flow_q(d, t, cl, f), -1.0);
                        eq_rhs.push_back(profiles.q_load(d, t, j, f) - profiles.q_pv(d, t, j, f));
                    }
                    // voltage drop: v_j - v_up + (R p + X q) 1000 / v_sub = 0
                    {
                        const int r = eq_row();
                        eq_trips.emplace_back(r, lay.volt(d, t, j, f), 1.0);
                        eq_trips.emplace_back(r, lay.volt(d, t, up, f), -1.0);
                        eq_trips.emplace_back(r, lay.flow_p(d, t, li, f),
                                              kWattsPerKw * line.resistance[f] / net.v_sub);
                        eq_trips.emplace_back(r, lay.flow_q(d, t, li, f),
                                              kWattsPerKw * line.reactance[f] / net.v_sub);
                        eq_rhs.push_back(0.0);
                    }
                }
            }
            // SoC recursion
            for (int c = 0; c < lay.n_cand; ++c) {
                const int r = eq_row();
                eq_trips.emplace_back(r, lay.soc(d, t, c), 1.0);
                if (t == 0)
                    eq_trips.emplace_back(r, lay.e0(c), -1.0);
                else
                    eq_trips.emplace_back(r, lay.soc(d, t - 1, c), -1.0);
                eq_trips.emplace_back(r, lay.charge(d, t, c), -3.0 * eta_p * grid.delta_t);
                eq_trips.emplace_back(r, lay.discharge(d, t, c), 3.0 * grid.delta_t / eta_m);
                eq_rhs.push_back(0.0);
            }
        }
        // daily cycle: end-of-day SoC returns to e0
        for (int c = 0; c < lay.n_cand; ++c) {
            const int r = eq_row();
            eq_trips.emplace_back(r, lay.soc(d, lay.n_hours - 1, c), 1.0);
            eq_trips.emplace_back(r, lay.e0(c), -1.0);
            eq_rhs.push_back(0.0);
        }
    }
    // installation count
    if (prob.n_ess != kFreeCount && lay.n_cand > 0) {
        const int r = eq_row();
        for (int c = 0; c < lay.n_cand; ++c) eq_trips.emplace_back(r, lay.loc(c), 1.0);
        eq_rhs.push_back(static_cast<double>(prob.n_ess));
    }
    // aggregate capacity
    if (prob.aggregate_cap_kwh && lay.n_cand > 0) {
        const int r = eq_row();
        for (int c = 0; c < lay.n_cand; ++c) eq_trips.emplace_back(r, lay.cap(c), 1.0);
        eq_rhs.push_back(*prob.aggregate_cap_kwh);
    }

    qp.A_eq.resize(static_cast<int>(eq_rhs.size()), lay.n_vars);
    qp.A_eq.setFromTriplets(eq_trips.begin(), eq_trips.end());
    qp.b_eq = Eigen::Map<Eigen::VectorXd>(eq_rhs.data(), static_cast<long>(eq_rhs.size()));

    // Inequality rows: rate linkage, SoC-capacity coupling, installation gate.
    std::vector<Eigen::Triplet<double>> in_trips;
    std::vector<double> in_lo, in_hi;
    auto in_row = [&in_lo]() { return static_cast<int>(in_lo.size()); };

    for (int c = 0; c < lay.n_cand; ++c) {
        for (int d = 0; d < lay.n_days; ++d) {
            for (int t = 0; t < lay.n_hours; ++t) {
                if (prob.use_rate_link) {
                    int r = in_row();
                    in_trips.emplace_back(r, lay.charge(d, t, c), 3.0);
                    in_trips.emplace_back(r, lay.cap(c), -1.0 / prob.rate_link_hours);
                    in_lo.push_back(-kInf);
                    in_hi.push_back(0.0);
                    r = in_row();
                    in_trips.emplace_back(r, lay.discharge(d, t, c), 3.0);
                    in_trips.emplace_back(r, lay.cap(c), -1.0 / prob.rate_link_hours);
                    in_lo.push_back(-kInf);
                    in_hi.push_back(0.0);
                } else {
                    int r = in_row();
                    in_trips.emplace_back(r, lay.charge(d, t, c), 3.0);
                    in_trips.emplace_back(r, lay.loc(c), -prob.ess_defaults.p_max_charge);
                    in_lo.push_back(-kInf);
                    in_hi.push_back(0.0);
                    r = in_row();
                    in_trips.emplace_back(r, lay.discharge(d, t, c), 3.0);
                    in_trips.emplace_back(r, lay.loc(c), -prob.ess_defaults.p_max_discharge);
                    in_lo.push_back(-kInf);
                    in_hi.push_back(0.0);
                }
                // SoC never above capacity
                int r = in_row();
                in_trips.emplace_back(r, lay.soc(d, t, c), 1.0);
                in_trips.emplace_back(r, lay.cap(c), -1.0);
                in_lo.push_back(-kInf);
                in_hi.push_back(0.0);
                // SoC floor scales with installation when e_min > 0
                if (prob.ess_defaults.e_min > 0.0) {
                    r = in_row();
                    in_trips.emplace_back(r, lay.soc(d, t, c), 1.0);
                    in_trips.emplace_back(r, lay.loc(c), -prob.ess_defaults.e_min);
                    in_lo.push_back(0.0);
                    in_hi.push_back(kInf);
                }
            }
        }
        // e0 within the SoC window
        int r = in_row();
        in_trips.emplace_back(r, lay.e0(c), 1.0);
        in_trips.emplace_back(r, lay.cap(c), -1.0);
        in_lo.push_back(-kInf);
        in_hi.push_back(0.0);
        if (prob.ess_defaults.e_min > 0.0) {
            r = in_row();
            in_trips.emplace_back(r, lay.e0(c), 1.0);
            in_trips.emplace_back(r, lay.loc(c), -prob.ess_defaults.e_min);
            in_lo.push_back(0.0);
            in_hi.push_back(kInf);
        }
        // installation gate
        r = in_row();
        in_trips.emplace_back(r, lay.cap(c), 1.0);
        in_trips.emplace_back(r, lay.loc(c), -prob.capacity_bound_kwh);
        in_lo.push_back(-kInf);
        in_hi.push_back(0.0);
    }

    qp.A_in.resize(static_cast<int>(in_lo.size()), lay.n_vars);
    qp.A_in.setFromTriplets(in_trips.begin(), in_trips.end());
    qp.in_lower = Eigen::Map<Eigen::VectorXd>(in_lo.data(), static_cast<long>(in_lo.size()));
    qp.in_upper = Eigen::Map<Eigen::VectorXd>(in_hi.data(), static_cast<long>(in_hi.size()));

    // Variable bounds.
    const int sub = net.bus_index(net.substation_bus);
    for (int d = 0; d < lay.n_days; ++d) {
        for (int t = 0; t < lay.n_hours; ++t) {
            for (int b = 0; b < lay.n_buses; ++b) {
                for (int f = 0; f < kNumPhases; ++f) {
                    const int v = lay.volt(d, t, b, f);
                    if (b == sub) {
                        qp.lower[v] = qp.upper[v] = net.v_sub;
                    } else {
                        qp.lower[v] = net.v_min;
                        qp.upper[v] = net.v_max;
                    }
                }
            }
            for (int c = 0; c < lay.n_cand; ++c) {
                const double rate_cap = prob.use_rate_link
                                            ? prob.capacity_bound_kwh / (3.0 * prob.rate_link_hours)
                                            : std::max(prob.ess_defaults.p_max_charge,
                                                       prob.ess_defaults.p_max_discharge) / 3.0;
                qp.lower[lay.charge(d, t, c)] = 0.0;
                qp.upper[lay.charge(d, t, c)] = rate_cap;
                qp.lower[lay.discharge(d, t, c)] = 0.0;
                qp.upper[lay.discharge(d, t, c)] = rate_cap;
                qp.lower[lay.soc(d, t, c)] = 0.0;
                qp.upper[lay.soc(d, t, c)] = prob.capacity_bound_kwh;
            }
        }
    }
    for (int c = 0; c < lay.n_cand; ++c) {
        qp.lower[lay.e0(c)] = 0.0;
        qp.upper[lay.e0(c)] = prob.capacity_bound_kwh;
        qp.lower[lay.cap(c)] = 0.0;
        qp.upper[lay.cap(c)] = prob.capacity_bound_kwh;
        if (binaries.values[c]) {
            qp.lower[lay.loc(c)] = qp.upper[lay.loc(c)] = static_cast<double>(*binaries.values[c]);
        } else {
            qp.lower[lay.loc(c)] = 0.0;
            qp.upper[lay.loc(c)] = 1.0;
        }
    }
    return out;
}

namespace {

// Day-weighted linear-model losses with no storage at all.
double base_objective_kwh(const SizingProblem& prob) {
    double total = 0.0;
    for (int d = 0; d < prob.grid->n_days(); ++d) {
        double daily = 0.0;
        for (int t = 0; t < prob.grid->hours_per_day; ++t) {
            const Injection inj = injection_from_profiles(*prob.net, *prob.profiles, d, t);
            daily += branch_losses(*prob.net, lin_flows(*prob.net, inj)).total_kw * prob.grid->delta_t;
        }
        total += prob.grid->days[d].weight_days * daily;
    }
    return total;
}

// Shared comparator: strictly better objective wins, ties go to the
// lexicographically smallest selected-bus set.
bool better_solution(double obj_a, const std::vector<int>& buses_a, double obj_b,
                     const std::vector<int>& buses_b) {
    const double tol = 1e-6 * std::max(1.0, std::abs(obj_b));
    if (obj_a < obj_b - tol) return true;
    if (obj_a > obj_b + tol) return false;
    return buses_a < buses_b;
}

std::vector<int> chosen_bus_ids(const SizingProblem& prob, const std::vector<int>& chosen) {
    std::vector<int> ids;
    for (int c : chosen) ids.push_back(prob.candidates[c]);
    return ids;
}

}  // namespace

std::vector<Placement> extract_placements(const SizingProblem& prob, const SizingLayout& lay,
                                          const Eigen::VectorXd& x, const std::vector<int>& chosen) {
    std::vector<Placement> out;
    const double dt = prob.grid->delta_t;
    for (int c : chosen) {
        Placement pl;
        pl.bus_id = prob.candidates[c];
        const int T = lay.n_hours;

        // Net schedule per day, rebalanced to an exact cycle and denoised.
        std::vector<std::vector<double>> net_rate(lay.n_days, std::vector<double>(T, 0.0));
        double max_rate = 0.0;
        for (int d = 0; d < lay.n_days; ++d) {
            double sum = 0.0;
            for (int t = 0; t < T; ++t) {
                net_rate[d][t] = x[lay.charge(d, t, c)] - x[lay.discharge(d, t, c)];
                sum += net_rate[d][t];
            }
            const double shift = sum / T;
            for (int t = 0; t < T; ++t) {
                net_rate[d][t] -= shift;
                if (std::abs(net_rate[d][t]) < 1e-9) net_rate[d][t] = 0.0;
                max_rate = std::max(max_rate, std::abs(net_rate[d][t]));
            }
        }

        // SoC excursion across all days sharing e0, relative to e0.
        double lo = 0.0, hi = 0.0;
        for (int d = 0; d < lay.n_days; ++d) {
            double e = 0.0;
            for (int t = 0; t < T; ++t) {
                e += 3.0 * net_rate[d][t] * dt;
                lo = std::min(lo, e);
                hi = std::max(hi, e);
            }
        }
        const double e_min = prob.ess_defaults.e_min;

        double cap;
        if (prob.aggregate_cap_kwh) {
            // The aggregate equality pins the capacities; report them as solved.
            cap = x[lay.cap(c)];
        } else {
            // Canonical smallest capacity supporting the schedule.
            cap = e_min + (hi - lo);
            if (prob.use_rate_link) cap = std::max(cap, 3.0 * max_rate * prob.rate_link_hours);
        }
        if (cap < 1e-9) cap = 0.0;

        // Project the schedule into the reported window: a uniform scale
        // keeps the cyclic sums exactly zero while absorbing solver noise.
        const double charge_limit = prob.use_rate_link ? cap / (3.0 * prob.rate_link_hours)
                                                       : prob.ess_defaults.p_max_charge / 3.0;
        const double discharge_limit = prob.use_rate_link ? cap / (3.0 * prob.rate_link_hours)
                                                          : prob.ess_defaults.p_max_discharge / 3.0;
        double max_pos = 0.0, max_neg = 0.0;
        for (const auto& day : net_rate)
            for (double r : day) {
                max_pos = std::max(max_pos, r);
                max_neg = std::max(max_neg, -r);
            }
        const double window = cap - e_min;
        double scale = 1.0;
        if (max_pos > charge_limit) scale = std::min(scale, charge_limit / max_pos);
        if (max_neg > discharge_limit) scale = std::min(scale, discharge_limit / max_neg);
        if (hi - lo > window) scale = std::min(scale, window / (hi - lo));
        if (window < 0.0 || !(scale > 0.0) || !std::isfinite(scale)) scale = 0.0;
        if (scale != 1.0) {
            for (auto& day : net_rate)
                for (double& r : day) r *= scale;
            lo *= scale;
            hi *= scale;
        }
        // one last-ulp guard on the rate limits
        for (auto& day : net_rate)
            for (double& r : day) r = std::clamp(r, -discharge_limit, charge_limit);

        // Place the excursion inside [e_min, cap], moving e0 only as needed.
        double e0 = x[lay.e0(c)];
        if (e0 + lo < e_min) e0 = e_min - lo;
        if (e0 + hi > cap) e0 = cap - hi;
        if (!prob.aggregate_cap_kwh) e0 = e_min - lo;  // canonical: floor at e_min
        e0 = std::clamp(e0, e_min, std::max(cap, e_min));

        pl.capacity_kwh = cap;
        pl.e0_kwh = e0;
        for (int d = 0; d < lay.n_days; ++d) {
            EssSchedule sched;
            sched.p_plus.resize(T);
            sched.p_minus.resize(T);
            for (int t = 0; t < T; ++t) {
                sched.p_plus[t] = std::max(net_rate[d][t], 0.0);
                sched.p_minus[t] = std::max(-net_rate[d][t], 0.0);
            }
            pl.schedules[prob.grid->days[d].day_id] = std::move(sched);
        }
        out.push_back(std::move(pl));
    }
    return out;
}

namespace {

struct NodeSolve {
    QpStatus status = QpStatus::max_iter;
    double objective = kInf;
    Eigen::VectorXd x;
    Eigen::VectorXd loc_values;
    int iterations = 0;
};

// One QP evaluation with the node's binary bounds swapped in.
NodeSolve solve_node(QpSolver& solver, const SizingQp& base, const BinaryAssignment& asg) {
    Eigen::VectorXd lower = base.qp.lower;
    Eigen::VectorXd upper = base.qp.upper;
    for (int c = 0; c < base.layout.n_cand; ++c) {
        if (asg.values[c]) {
            lower[base.layout.loc(c)] = upper[base.layout.loc(c)] = static_cast<double>(*asg.values[c]);
        }
    }
    solver.update_variable_bounds(lower, upper);
    const QpSolution sol = solver.solve();
    NodeSolve out;
    out.status = sol.status;
    out.iterations = sol.iterations;
    if (sol.status == QpStatus::optimal) {
        out.objective = sol.objective_value;
        out.x = sol.x;
        out.loc_values.resize(base.layout.n_cand);
        for (int c = 0; c < base.layout.n_cand; ++c) out.loc_values[c] = sol.x[base.layout.loc(c)];
    }
    return out;
}

}  // namespace

SizingSolution solve_miqp(const SizingProblem& prob) {
    prob.validate();
    const auto t_start = std::chrono::steady_clock::now();

    SizingSolution result;
    result.base_objective_kwh = base_objective_kwh(prob);

    const int n_cand = static_cast<int>(prob.candidates.size());
    const SizingQp base = build_qp(prob, BinaryAssignment::relaxed(n_cand));
    QpSolver solver(base.qp, prob.qp_settings);

    if (n_cand == 0) {
        const QpSolution sol = solver.solve();
        result.status = sol.status;
        result.objective_kwh = sol.objective_value;
        result.stats.nodes_explored = 1;
        result.stats.qp_iterations_total = sol.iterations;
        result.stats.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        if (sol.status != QpStatus::optimal)
            throw SolverError(std::string("sizing QP failed: ") + to_string(sol.status));
        return result;
    }

    struct Node {
        double bound;
        long seq;
        BinaryAssignment asg;
        bool operator>(const Node& other) const {
            return bound != other.bound ? bound > other.bound : seq > other.seq;
        }
    };
    std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
    long seq = 0;
    constexpr int kNodeLimit = 100000;
    constexpr double kIntTol = 1e-6;

    bool have_incumbent = false;
    double inc_obj = kInf;
    std::vector<int> inc_chosen;
    Eigen::VectorXd inc_x;
    bool any_infeasible_leaf = false;

    open.push({-kInf, seq++, BinaryAssignment::relaxed(n_cand)});

    while (!open.empty() && result.stats.nodes_explored < kNodeLimit) {
        Node node = open.top();
        open.pop();
        if (have_incumbent && node.bound > inc_obj + 1e-6 * std::max(1.0, std::abs(inc_obj))) continue;

        // Combinatorial feasibility of the partial assignment.
        int ones = 0, free_cnt = 0;
        for (const auto& v : node.asg.values) {
            if (!v) ++free_cnt;
            else if (*v == 1) ++ones;
        }
        if (prob.n_ess != kFreeCount && (ones > prob.n_ess || ones + free_cnt < prob.n_ess)) continue;

        const NodeSolve ns = solve_node(solver, base, node.asg);
        ++result.stats.nodes_explored;
        result.stats.qp_iterations_total += ns.iterations;
        if (ns.status == QpStatus::infeasible) {
            any_infeasible_leaf = true;
            continue;
        }
        if (ns.status != QpStatus::optimal)
            throw SolverError("sizing node QP hit the iteration limit");
        if (have_incumbent && ns.objective > inc_obj + 1e-6 * std::max(1.0, std::abs(inc_obj))) continue;

        // Most fractional binary.
        int branch_c = -1;
        double worst_frac = kIntTol;
        for (int c = 0; c < n_cand; ++c) {
            if (node.asg.values[c]) continue;
            const double v = ns.loc_values[c];
            const double frac = std::abs(v - std::round(v));
            if (frac > worst_frac) {
                worst_frac = frac;
                branch_c = c;
            }
        }

        if (branch_c < 0) {
            // Integer feasible; candidate incumbent.
            std::vector<int> chosen;
            for (int c = 0; c < n_cand; ++c)
                if (ns.loc_values[c] > 0.5) chosen.push_back(c);
            const std::vector<int> ids = chosen_bus_ids(prob, chosen);
            if (!have_incumbent || better_solution(ns.objective, ids, inc_obj, chosen_bus_ids(prob, inc_chosen))) {
                have_incumbent = true;
                inc_obj = ns.objective;
                inc_chosen = chosen;
                inc_x = ns.x;
            }
            continue;
        }

        BinaryAssignment a0 = node.asg, a1 = node.asg;
        a0.values[branch_c] = 0;
        a1.values[branch_c] = 1;
        open.push({ns.objective, seq++, std::move(a1)});
        open.push({ns.objective, seq++, std::move(a0)});
    }

    result.stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    if (!have_incumbent) {
        if (any_infeasible_leaf || open.empty()) {
            result.status = QpStatus::infeasible;
            throw InfeasibleError("sizing problem infeasible: no installation pattern satisfies the constraints");
        }
        throw SolverError("sizing search exhausted the node limit without an incumbent");
    }

    double best_open_bound = inc_obj;
    while (!open.empty()) {
        best_open_bound = std::min(best_open_bound, open.top().bound);
        open.pop();
    }
    result.optimality_gap =
        std::max(0.0, (inc_obj - best_open_bound) / std::max(1e-12, std::abs(inc_obj)));
    result.objective_kwh = inc_obj;
    result.placements = extract_placements(prob, base.layout, inc_x, inc_chosen);
    result.status = QpStatus::optimal;
    return result;
}

SizingSolution enumerate_oracle(const SizingProblem& prob, int budget) {
    prob.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const int n_cand = static_cast<int>(prob.candidates.size());

    // Enumerate index subsets of each admissible size in lexicographic order.
    std::vector<std::vector<int>> subsets;
    std::vector<int> sizes;
    if (prob.n_ess == kFreeCount) {
        for (int k = 0; k <= n_cand; ++k) sizes.push_back(k);
    } else {
        sizes.push_back(prob.n_ess);
    }
    for (int k : sizes) {
        // standard lexicographic k-combinations
        std::vector<bool> mask(n_cand, false);
        std::fill(mask.begin(), mask.begin() + k, true);
        do {
            std::vector<int> subset;
            for (int c = 0; c < n_cand; ++c)
                if (mask[c]) subset.push_back(c);
            subsets.push_back(std::move(subset));
        } while (std::prev_permutation(mask.begin(), mask.end()));
    }
    if (static_cast<int>(subsets.size()) > budget)
        throw ValidationError("enumeration budget exceeded: " + std::to_string(subsets.size()) +
                              " assignments > " + std::to_string(budget));

    SizingSolution result;
    result.base_objective_kwh = base_objective_kwh(prob);
    const SizingQp base = build_qp(prob, BinaryAssignment::relaxed(n_cand));
    QpSolver solver(base.qp, prob.qp_settings);

    bool have_best = false;
    double best_obj = kInf;
    std::vector<int> best_chosen;
    Eigen::VectorXd best_x;

    for (const std::vector<int>& subset : subsets) {
        BinaryAssignment asg;
        asg.values.assign(n_cand, 0);
        for (int c : subset) asg.values[c] = 1;
        const NodeSolve ns = solve_node(solver, base, asg);
        ++result.stats.nodes_explored;
        result.stats.qp_iterations_total += ns.iterations;
        if (ns.status == QpStatus::infeasible) continue;
        if (ns.status != QpStatus::optimal)
            throw SolverError("enumeration QP hit the iteration limit");
        const std::vector<int> ids = chosen_bus_ids(prob, subset);
        if (!have_best || better_solution(ns.objective, ids, best_obj, chosen_bus_ids(prob, best_chosen))) {
            have_best = true;
            best_obj = ns.objective;
            best_chosen = subset;
            best_x = ns.x;
        }
    }
    result.stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    if (!have_best) {
        result.status = QpStatus::infeasible;
        throw InfeasibleError("enumeration found no feasible assignment");
    }
    result.objective_kwh = best_obj;
    result.placements = extract_placements(prob, base.layout, best_x, best_chosen);
    result.optimality_gap = 0.0;
    result.status = QpStatus::optimal;
    return result;
}

std::vector<DessRow> dess_study(const SizingProblem& prob, const std::vector<int>& n_values) {
    if (!prob.aggregate_cap_kwh)
        throw ValidationError("distributed study requires the aggregate capacity to be set");
    std::vector<DessRow> rows;
    for (int n : n_values) {
        SizingProblem sub = prob;
        sub.n_ess = n;
        const SizingSolution sol = solve_miqp(sub);
        DessRow row;
        row.n_ess = n;
        row.objective_kwh = sol.objective_kwh;
        for (const Placement& pl : sol.placements) {
            row.locations.push_back(pl.bus_id);
            row.capacities_kwh.push_back(pl.capacity_kwh);
        }
        row.loss_reduction_percent =
            sol.base_objective_kwh > 0.0
                ? 100.0 * (sol.base_objective_kwh - sol.objective_kwh) / sol.base_objective_kwh
                : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

EssSpec placement_spec(const Placement& placement, const EssSpec& defaults, bool use_rate_link,
                       double rate_link_hours) {
    EssSpec spec = defaults;
    spec.e_max = std::max(placement.capacity_kwh, defaults.e_min);
    spec.e0 = placement.e0_kwh;
    if (use_rate_link) {
        spec.p_max_charge = placement.capacity_kwh / rate_link_hours;
        spec.p_max_discharge = placement.capacity_kwh / rate_link_hours;
    }
    return spec;
}

std::string format_solution(const SizingSolution& sol, bool include_time) {
    std::ostringstream out;
    char buf[160];
    for (const Placement& pl : sol.placements) {
        std::snprintf(buf, sizeof buf, "[PLACEMENT] %d %.6f %.6f\n", pl.bus_id, pl.capacity_kwh, pl.e0_kwh);
        out << buf;
        for (const auto& [day_id, sched] : pl.schedules) {
            out << "schedule " << day_id << " ess_" << pl.bus_id << "_day" << day_id << ".csv\n";
        }
    }
    out << "[STATS]\n";
    std::snprintf(buf, sizeof buf, "objective_kwh %.9f\n", sol.objective_kwh);
    out << buf;
    std::snprintf(buf, sizeof buf, "base_objective_kwh %.9f\n", sol.base_objective_kwh);
    out << buf;
    std::snprintf(buf, sizeof buf, "gap %.3e\n", sol.optimality_gap);
    out << buf;
    out << "nodes " << sol.stats.nodes_explored << "\n";
    out << "qp_iterations " << sol.stats.qp_iterations_total << "\n";
    if (include_time) {
        std::snprintf(buf, sizeof buf, "wall_time_s %.3f\n", sol.stats.wall_time_s);
        out << buf;
    }
    return out.str();
}

}  // namespace gridstor
