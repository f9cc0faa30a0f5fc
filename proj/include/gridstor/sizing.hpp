#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridstor/netmodel.hpp"
#include "gridstor/powerflow.hpp"
#include "gridstor/profiles.hpp"
#include "gridstor/qpsolve.hpp"
#include "gridstor/storage.hpp"

namespace gridstor {

/// Marker for an unconstrained number of installations.
inline constexpr int kFreeCount = -1;

struct SizingProblem {
    const Network* net = nullptr;
    const ProfileSet* profiles = nullptr;
    const TimeGrid* grid = nullptr;
    std::vector<int> candidates;  // bus ids
    int n_ess = 1;                // kFreeCount leaves the installation count open
    std::optional<double> aggregate_cap_kwh;  // total-capacity equality, set for distributed studies
    double capacity_bound_kwh = 0.0;          // per-candidate cap used in the installation linkage
    EssSpec ess_defaults;                     // efficiencies, e_min, fixed rates when the link is off
    bool use_rate_link = true;                // rate limit = capacity / rate_link_hours
    double rate_link_hours = 2.0;
    QpSettings qp_settings;

    void validate() const;  // throws ValidationError
};

/// Column layout of the sizing QP, shared by the builder and the solvers.
struct SizingLayout {
    int n_days = 0, n_hours = 0, n_lines = 0, n_buses = 0, n_cand = 0;
    int n_vars = 0;
    int flow_p0 = 0, flow_q0 = 0, volt0 = 0, chg0 = 0, dis0 = 0, soc0 = 0, e00 = 0, cap0 = 0, loc0 = 0;

    int flow_p(int d, int t, int line, int f) const {
        return flow_p0 + ((d * n_hours + t) * n_lines + line) * kNumPhases + f;
    }
    int flow_q(int d, int t, int line, int f) const {
        return flow_q0 + ((d * n_hours + t) * n_lines + line) * kNumPhases + f;
    }
    int volt(int d, int t, int bus, int f) const {
        return volt0 + ((d * n_hours + t) * n_buses + bus) * kNumPhases + f;
    }
    int charge(int d, int t, int c) const { return chg0 + (d * n_hours + t) * n_cand + c; }
    int discharge(int d, int t, int c) const { return dis0 + (d * n_hours + t) * n_cand + c; }
    int soc(int d, int t, int c) const { return soc0 + (d * n_hours + t) * n_cand + c; }
    int e0(int c) const { return e00 + c; }
    int cap(int c) const { return cap0 + c; }
    int loc(int c) const { return loc0 + c; }
};

struct SizingQp {
    QpProblem qp;
    SizingLayout layout;
};

/// Fixed installation pattern per candidate: 0, 1, or relaxed to [0,1].
struct BinaryAssignment {
    std::vector<std::optional<int>> values;  // per candidate; nullopt = relaxed

    static BinaryAssignment relaxed(int n_cand) { return {std::vector<std::optional<int>>(n_cand)}; }
    int count_fixed_ones() const;
    bool fully_fixed() const;
};

/// Assemble the loss-minimization QP: loss-free branch flows, linear voltage
/// drops with bus-voltage bounds, SoC recursion with a per-day cycle, the
/// installation-count row, the optional aggregate-capacity row, and the
/// capacity linkage rows gating each candidate on its binary.
SizingQp build_qp(const SizingProblem& prob, const BinaryAssignment& binaries);

struct SolverStats {
    int nodes_explored = 0;
    long qp_iterations_total = 0;
    double wall_time_s = 0.0;
};

struct SizingSolution {
    std::vector<Placement> placements;  // selected buses in ascending id order
    double objective_kwh = 0.0;         // day-weighted annual losses of the linear model
    double base_objective_kwh = 0.0;    // same objective with all candidates off
    SolverStats stats;
    double optimality_gap = 0.0;
    QpStatus status = QpStatus::optimal;
};

/// Branch-and-bound on the installation binaries: best-first on the
/// relaxation bound, branching on the most fractional binary, lowest-bus-id
/// tie break among equal objectives.
SizingSolution solve_miqp(const SizingProblem& prob);

/// Exhaustive alternative: solves the QP for every feasible assignment.
/// Guarded by a combinatorial budget; intended for tests and small studies.
SizingSolution enumerate_oracle(const SizingProblem& prob, int budget = 10000);

struct DessRow {
    int n_ess = 0;
    std::vector<int> locations;
    std::vector<double> capacities_kwh;
    double objective_kwh = 0.0;
    double loss_reduction_percent = 0.0;   // vs the no-storage linear objective
    double hosting_increase_percent = 0.0; // filled by callers that run the hosting study
};

/// Re-solve with the aggregate-capacity equality active for each N.
std::vector<DessRow> dess_study(const SizingProblem& prob, const std::vector<int>& n_values);

/// Extract placements from a solved QP vector: net schedules split by sign,
/// and (when the aggregate equality is off) capacities canonicalized to the
/// smallest value supporting the schedule.
std::vector<Placement> extract_placements(const SizingProblem& prob, const SizingLayout& layout,
                                          const Eigen::VectorXd& x, const std::vector<int>& chosen);

/// Serialize a solution (placements + stats) to the solution text format.
std::string format_solution(const SizingSolution& sol, bool include_time = false);

/// Concrete storage parameters for a sized placement, for feasibility checks
/// and simulation.
EssSpec placement_spec(const Placement& placement, const EssSpec& defaults, bool use_rate_link,
                       double rate_link_hours);

struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace gridstor
