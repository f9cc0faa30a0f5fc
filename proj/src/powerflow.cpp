#include "gridstor/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gridstor {

namespace {

constexpr double kWattsPerKw = 1000.0;
constexpr double kSBaseVa = 1000.0;  // per-phase power base, 1 kVA

std::complex<double> phase_rotation(int phase) {
    // a: 0 deg, b: -120 deg, c: +120 deg
    constexpr double deg120 = 2.0 * std::numbers::pi / 3.0;
    switch (phase) {
        case kPhaseA: return {1.0, 0.0};
        case kPhaseB: return std::polar(1.0, -deg120);
        default: return std::polar(1.0, deg120);
    }
}

void check_injection(const Network& net, const Injection& inj) {
    if (inj.n_buses != net.n_buses() || inj.p.size() != inj.q.size() ||
        inj.p.size() != static_cast<size_t>(net.n_buses()) * kNumPhases)
        throw ValidationError("injection size does not match network");
    for (int b = 0; b < net.n_buses(); ++b) {
        for (int f = 0; f < kNumPhases; ++f) {
            if (!net.buses[b].phases_present[f] && (inj.p_at(b, f) != 0.0 || inj.q_at(b, f) != 0.0))
                throw ValidationError("injection on absent phase " + std::string(1, phase_letter(f)) +
                                      " of bus " + std::to_string(net.buses[b].id));
        }
    }
}

}  // namespace

Injection zero_injection(const Network& net) {
    Injection inj;
    inj.n_buses = net.n_buses();
    inj.p.assign(static_cast<size_t>(inj.n_buses) * kNumPhases, 0.0);
    inj.q.assign(inj.p.size(), 0.0);
    return inj;
}

Injection injection_from_profiles(const Network& net, const ProfileSet& profiles, int day, int hour) {
    Injection inj = zero_injection(net);
    for (int b = 0; b < net.n_buses(); ++b) {
        for (int f = 0; f < kNumPhases; ++f) {
            if (!net.buses[b].phases_present[f]) continue;
            inj.p_at(b, f) = profiles.p_load(day, hour, b, f) - profiles.p_pv(day, hour, b, f);
            inj.q_at(b, f) = profiles.q_load(day, hour, b, f) - profiles.q_pv(day, hour, b, f);
        }
    }
    return inj;
}

double PowerFlowSolution::line_loss_kw(int line) const {
    return loss_kw[line * kNumPhases + 0] + loss_kw[line * kNumPhases + 1] + loss_kw[line * kNumPhases + 2];
}

PowerFlowSolution solve_exact(const Network& net, const Injection& inj, double tol, int max_iter) {
    check_injection(net, inj);
    if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
    const Topology topo = build_topology(net);
    const int n = net.n_buses();
    const int m = net.n_lines();

    PowerFlowSolution sol;
    sol.converged = true;
    sol.v.assign(static_cast<size_t>(n) * kNumPhases, {0.0, 0.0});
    sol.p_flow.assign(static_cast<size_t>(m) * kNumPhases, 0.0);
    sol.q_flow.assign(sol.p_flow.size(), 0.0);
    sol.loss_kw.assign(sol.p_flow.size(), 0.0);
    sol.injections = inj;

    std::vector<std::complex<double>> i_branch(m);
    std::vector<std::complex<double>> v(n);

    for (int f = 0; f < kNumPhases; ++f) {
        const std::complex<double> v_source = net.v_sub * phase_rotation(f);
        std::fill(v.begin(), v.end(), v_source);  // flat start

        int iter = 0;
        bool phase_converged = false;
        for (; iter < max_iter; ++iter) {
            // Backward: accumulate branch currents from the leaves.
            std::fill(i_branch.begin(), i_branch.end(), std::complex<double>{0.0, 0.0});
            for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
                const int bus = *it;
                const int pl = topo.parent_line[bus];
                if (pl < 0) continue;
                const std::complex<double> s{inj.p_at(bus, f) * kWattsPerKw, inj.q_at(bus, f) * kWattsPerKw};
                std::complex<double> i = std::conj(s / v[bus]);
                for (int cl : topo.child_lines[bus]) i += i_branch[cl];
                i_branch[pl] = i;
            }
            // Forward: propagate voltage drops from the substation.
            double max_dv = 0.0;
            for (int bus : topo.order) {
                const int pl = topo.parent_line[bus];
                if (pl < 0) continue;
                const Line& l = net.lines[pl];
                const std::complex<double> z{l.resistance[f], l.reactance[f]};
                const std::complex<double> v_new = v[topo.parent_bus[bus]] - z * i_branch[pl];
                max_dv = std::max(max_dv, std::abs(v_new - v[bus]));
                v[bus] = v_new;
            }
            if (max_dv / net.base_voltage < tol) {
                phase_converged = true;
                ++iter;
                break;
            }
        }
        sol.iterations = std::max(sol.iterations, iter);
        sol.converged = sol.converged && phase_converged;

        for (int b = 0; b < n; ++b) sol.v[b * kNumPhases + f] = v[b];
        for (int li = 0; li < m; ++li) {
            const Line& l = net.lines[li];
            const std::complex<double> s_send = v[topo.upstream_bus[li]] * std::conj(i_branch[li]);
            sol.p_flow[li * kNumPhases + f] = s_send.real() / kWattsPerKw;
            sol.q_flow[li * kNumPhases + f] = s_send.imag() / kWattsPerKw;
            sol.loss_kw[li * kNumPhases + f] = l.resistance[f] * std::norm(i_branch[li]) / kWattsPerKw;
        }
    }
    sol.total_loss_kw = 0.0;
    for (double x : sol.loss_kw) sol.total_loss_kw += x;
    return sol;
}

double max_power_mismatch_pu(const Network& net, const PowerFlowSolution& sol) {
    const Topology topo = build_topology(net);
    double worst = 0.0;
    for (int b = 0; b < net.n_buses(); ++b) {
        if (topo.parent_line[b] < 0) continue;  // substation balances the rest
        for (int f = 0; f < kNumPhases; ++f) {
            // Currents implied by the solved voltages alone.
            const int pl = topo.parent_line[b];
            const Line& lp = net.lines[pl];
            const std::complex<double> zp{lp.resistance[f], lp.reactance[f]};
            std::complex<double> i_net = (sol.v_at(topo.parent_bus[b], f) - sol.v_at(b, f)) / zp;
            for (int cl : topo.child_lines[b]) {
                const Line& lc = net.lines[cl];
                const std::complex<double> zc{lc.resistance[f], lc.reactance[f]};
                i_net -= (sol.v_at(b, f) - sol.v_at(topo.child_bus[cl], f)) / zc;
            }
            const std::complex<double> s_implied = sol.v_at(b, f) * std::conj(i_net);
            const std::complex<double> s_spec{sol.injections.p_at(b, f) * kWattsPerKw,
                                              sol.injections.q_at(b, f) * kWattsPerKw};
            worst = std::max(worst, std::abs(s_implied - s_spec) / kSBaseVa);
        }
    }
    return worst;
}

LinFlows lin_flows(const Network& net, const Injection& inj) {
    check_injection(net, inj);
    const Topology topo = build_topology(net);
    const int m = net.n_lines();
    LinFlows flows;
    flows.p.assign(static_cast<size_t>(m) * kNumPhases, 0.0);
    flows.q.assign(flows.p.size(), 0.0);
    // Leaves first: flow on a line is the child injection plus child-line flows.
    for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
        const int bus = *it;
        const int pl = topo.parent_line[bus];
        if (pl < 0) continue;
        for (int f = 0; f < kNumPhases; ++f) {
            double p = inj.p_at(bus, f);
            double q = inj.q_at(bus, f);
            for (int cl : topo.child_lines[bus]) {
                p += flows.p[cl * kNumPhases + f];
                q += flows.q[cl * kNumPhases + f];
            }
            flows.p[pl * kNumPhases + f] = p;
            flows.q[pl * kNumPhases + f] = q;
        }
    }
    return flows;
}

std::vector<double> lin_voltages(const Network& net, const LinFlows& flows) {
    const Topology topo = build_topology(net);
    std::vector<double> v(static_cast<size_t>(net.n_buses()) * kNumPhases, 0.0);
    const int root = net.bus_index(net.substation_bus);
    for (int f = 0; f < kNumPhases; ++f) v[root * kNumPhases + f] = net.v_sub;
    for (int bus : topo.order) {
        const int pl = topo.parent_line[bus];
        if (pl < 0) continue;
        const Line& l = net.lines[pl];
        for (int f = 0; f < kNumPhases; ++f) {
            const double drop = kWattsPerKw *
                                (flows.p[pl * kNumPhases + f] * l.resistance[f] +
                                 flows.q[pl * kNumPhases + f] * l.reactance[f]) /
                                net.v_sub;
            v[bus * kNumPhases + f] = v[topo.parent_bus[bus] * kNumPhases + f] - drop;
        }
    }
    return v;
}

LineLosses branch_losses(const Network& net, const LinFlows& flows) {
    LineLosses out;
    out.per_line_kw.assign(net.n_lines(), 0.0);
    const double v2 = net.v_sub * net.v_sub;
    for (int li = 0; li < net.n_lines(); ++li) {
        const Line& l = net.lines[li];
        double loss = 0.0;
        for (int f = 0; f < kNumPhases; ++f) {
            const double p = flows.p[li * kNumPhases + f];
            const double q = flows.q[li * kNumPhases + f];
            loss += kWattsPerKw * l.resistance[f] * (p * p + q * q) / v2;
        }
        out.per_line_kw[li] = loss;
        out.total_kw += loss;
    }
    return out;
}

PowerFlowSolution lin_solution(const Network& net, const Injection& inj) {
    const LinFlows flows = lin_flows(net, inj);
    const std::vector<double> vmag = lin_voltages(net, flows);
    PowerFlowSolution sol;
    sol.v.resize(vmag.size());
    for (int b = 0; b < net.n_buses(); ++b) {
        for (int f = 0; f < kNumPhases; ++f) {
            sol.v[b * kNumPhases + f] = vmag[b * kNumPhases + f] * phase_rotation(f);
        }
    }
    sol.p_flow = flows.p;
    sol.q_flow = flows.q;
    sol.loss_kw.assign(flows.p.size(), 0.0);
    const double v2 = net.v_sub * net.v_sub;
    for (int li = 0; li < net.n_lines(); ++li) {
        for (int f = 0; f < kNumPhases; ++f) {
            const double p = flows.p[li * kNumPhases + f];
            const double q = flows.q[li * kNumPhases + f];
            sol.loss_kw[li * kNumPhases + f] = kWattsPerKw * net.lines[li].resistance[f] * (p * p + q * q) / v2;
        }
    }
    for (double x : sol.loss_kw) sol.total_loss_kw += x;
    sol.converged = true;
    sol.iterations = 0;
    sol.injections = inj;
    return sol;
}

double distflow_residual(const Network& net, const PowerFlowSolution& sol) {
    const Topology topo = build_topology(net);
    const double vbase2 = net.base_voltage * net.base_voltage;
    double worst = 0.0;
    for (int li = 0; li < net.n_lines(); ++li) {
        const int up = topo.upstream_bus[li];
        const int child = topo.child_bus[li];
        const Line& l = net.lines[li];
        for (int f = 0; f < kNumPhases; ++f) {
            const double p = sol.p_flow_at(li, f);  // kW, sending end
            const double q = sol.q_flow_at(li, f);
            const double vu2 = std::norm(sol.v_at(up, f));   // volts^2
            const double vc2 = std::norm(sol.v_at(child, f));
            // (p^2+q^2)/v^2 in kW^2/V^2; times 1000 gives SI watts over volts^2.
            const double flow2_over_v2 = kWattsPerKw * (p * p + q * q) / vu2;  // kA^2-ish: kW/V units

            double p_down = 0.0, q_down = 0.0;
            for (int cl : topo.child_lines[child]) {
                p_down += sol.p_flow_at(cl, f);
                q_down += sol.q_flow_at(cl, f);
            }
            const double rp = p - (p_down + l.resistance[f] * flow2_over_v2 + sol.injections.p_at(child, f));
            const double rq = q - (q_down + l.reactance[f] * flow2_over_v2 + sol.injections.q_at(child, f));
            // Squared-voltage drop identity, in volts^2 then per unit.
            const double rv = vc2 - (vu2 - 2.0 * kWattsPerKw * (p * l.resistance[f] + q * l.reactance[f]) +
                                     (l.resistance[f] * l.resistance[f] + l.reactance[f] * l.reactance[f]) *
                                         kWattsPerKw * flow2_over_v2);
            worst = std::max({worst, std::abs(rp) / (kSBaseVa / kWattsPerKw),
                              std::abs(rq) / (kSBaseVa / kWattsPerKw), std::abs(rv) / vbase2});
        }
    }
    return worst;
}

}  // namespace gridstor
