#pragma once

#include <complex>
#include <vector>

#include "gridstor/netmodel.hpp"
#include "gridstor/profiles.hpp"

namespace gridstor {

/// Net per-(bus, phase) power in kW / kvar, consumption positive.
struct Injection {
    int n_buses = 0;
    std::vector<double> p;  // kW
    std::vector<double> q;  // kvar

    double& p_at(int bus, int phase) { return p[bus * kNumPhases + phase]; }
    double& q_at(int bus, int phase) { return q[bus * kNumPhases + phase]; }
    double p_at(int bus, int phase) const { return p[bus * kNumPhases + phase]; }
    double q_at(int bus, int phase) const { return q[bus * kNumPhases + phase]; }
};

Injection zero_injection(const Network& net);

/// load - pv at one (day, hour); ESS terms are superimposed by callers.
Injection injection_from_profiles(const Network& net, const ProfileSet& profiles, int day, int hour);

struct PowerFlowSolution {
    std::vector<std::complex<double>> v;  // volts, per (bus, phase)
    std::vector<double> p_flow;           // kW, per (line, phase), sending end (upstream side)
    std::vector<double> q_flow;           // kvar, per (line, phase)
    std::vector<double> loss_kw;          // kW, per (line, phase)
    double total_loss_kw = 0.0;
    bool converged = false;
    int iterations = 0;
    Injection injections;  // what the solution was computed for

    std::complex<double> v_at(int bus, int phase) const { return v[bus * kNumPhases + phase]; }
    double p_flow_at(int line, int phase) const { return p_flow[line * kNumPhases + phase]; }
    double q_flow_at(int line, int phase) const { return q_flow[line * kNumPhases + phase]; }
    double loss_at(int line, int phase) const { return loss_kw[line * kNumPhases + phase]; }
    double line_loss_kw(int line) const;  // all three phases
};

/// Backward/forward sweep with flat start. Phases are decoupled; the
/// substation is held at v_sub with angles {0, -120, +120} degrees.
/// tol is the max per-unit complex-voltage change between sweeps.
PowerFlowSolution solve_exact(const Network& net, const Injection& inj, double tol = 1e-8, int max_iter = 100);

/// Largest per-unit complex power imbalance over buses and phases, recomputed
/// from the solution voltages and line impedances alone. Base: 1 kVA.
double max_power_mismatch_pu(const Network& net, const PowerFlowSolution& sol);

struct LinFlows {
    std::vector<double> p;  // kW, per (line, phase), downstream-sum convention
    std::vector<double> q;  // kvar

    double p_at(int line, int phase) const { return p[line * kNumPhases + phase]; }
    double q_at(int line, int phase) const { return q[line * kNumPhases + phase]; }
};

/// Loss-free branch flows: each line carries the sum of net injections over
/// its downstream bus set, per phase.
LinFlows lin_flows(const Network& net, const Injection& inj);

/// Linearized voltage magnitudes: v_child = v_parent - (pR + qX)/v_sub
/// accumulated along the path from the substation. Volts, per (bus, phase).
std::vector<double> lin_voltages(const Network& net, const LinFlows& flows);

struct LineLosses {
    std::vector<double> per_line_kw;  // three-phase total per line
    double total_kw = 0.0;
};

/// Quadratic loss model R (p^2 + q^2) / v_sub^2 summed over phases per line.
LineLosses branch_losses(const Network& net, const LinFlows& flows);

/// Assemble the linear model's view as a PowerFlowSolution (nominal angles,
/// loss-free flows, quadratic-model losses) for cross-model checks.
PowerFlowSolution lin_solution(const Network& net, const Injection& inj);

/// Max absolute per-unit violation of the full branch-flow recursions
/// (power balance with quadratic loss terms and the squared-voltage drop
/// identity), evaluated at the solution's own voltages and sending-end flows.
/// Zero (to solver tolerance) for an exact solution; strictly positive for
/// the linearized solution under load.
double distflow_residual(const Network& net, const PowerFlowSolution& sol);

}  // namespace gridstor
