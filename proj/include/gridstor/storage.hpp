#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace gridstor {

/// Storage parameters. Rates and the SoC window are three-phase totals in
/// kW / kWh; charge and discharge rates in schedules are per phase.
/// Efficiencies default to 1 (lossless model).
struct EssSpec {
    double eta_plus = 1.0;
    double eta_minus = 1.0;
    double p_max_charge = 0.0;     // kW, three-phase total
    double p_max_discharge = 0.0;  // kW, three-phase total
    double e_min = 0.0;            // kWh
    double e_max = 0.0;            // kWh
    double e0 = 0.0;               // kWh

    void validate() const;  // throws ValidationError
};

/// Hourly charge/discharge rates, kW per phase.
struct EssSchedule {
    std::vector<double> p_plus;
    std::vector<double> p_minus;

    int n_hours() const { return static_cast<int>(p_plus.size()); }
};

/// SoC series of length n_hours+1; element 0 is e0, element t the state
/// after hour t-1. Each step adds 3 (eta+ p+ - p-/eta-) dt.
std::vector<double> soc_trajectory(const EssSpec& spec, const EssSchedule& sched, double delta_t);

struct CycleCheck {
    bool ok = false;
    double net_energy_kwh = 0.0;  // three-phase energy imbalance over the cycle
    std::string message;
};

/// Cyclic feasibility: the efficiency-weighted charge/discharge sum over the
/// cycle must vanish so the trajectory returns to e0.
CycleCheck check_cycle(const EssSpec& spec, const EssSchedule& sched, double delta_t, double tol_kwh = 1e-6);

struct LimitViolation {
    enum class Kind { charge_rate, discharge_rate, soc_low, soc_high, negative_rate, simultaneous };
    Kind kind;
    int hour = 0;       // for SoC limits, the hour after which the bound is broken
    double value = 0.0;
    double bound = 0.0;
};

struct LimitCheck {
    bool ok = false;
    std::vector<LimitViolation> violations;
    std::vector<int> simultaneous_hours;  // hours with both p+ and p- nonzero (warning only with unit efficiency)
};

/// Rate and SoC window checks (three-phase rates against p_max, trajectory
/// against [e_min, e_max]). Simultaneous charge/discharge is a violation
/// when efficiencies are non-unit, otherwise a warning.
LimitCheck check_limits(const EssSpec& spec, const EssSchedule& sched, double delta_t);

/// A sized and scheduled installation at one bus. Schedules are keyed by
/// representative-day id; rates apply equally to all three phases.
struct Placement {
    int bus_id = 0;
    double capacity_kwh = 0.0;
    double e0_kwh = 0.0;
    std::map<int, EssSchedule> schedules;
};

/// Schedule CSV: header `hour,p_plus_kw_per_phase,p_minus_kw_per_phase`.
void save_schedule(std::ostream& out, const EssSchedule& sched);
EssSchedule load_schedule(std::istream& in);

}  // namespace gridstor
