#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridstor/netmodel.hpp"
#include "gridstor/powerflow.hpp"
#include "gridstor/profiles.hpp"
#include "gridstor/storage.hpp"

namespace gridstor {

/// Superimpose the placements' hourly net rates onto a load/PV injection.
/// Three-phase units charge and discharge the same rate on every phase.
Injection apply_ess(const Network& net, Injection inj, std::span<const Placement> placements, int day_id,
                    int hour);

struct SeasonalLosses {
    double annual_kwh = 0.0;
    std::vector<std::pair<std::string, double>> per_season_kwh;  // in grid day order
};

/// Exact-solver losses integrated over every represented hour, weighted by
/// the day weights. Any non-converged hour aborts with the timestep named.
SeasonalLosses annual_losses(const Network& net, const ProfileSet& profiles, const TimeGrid& grid,
                             std::span<const Placement> placements, int jobs = 1);

struct HostingResult {
    double per_system_kw = 0.0;   // uniform rating at the threshold
    double total_kw = 0.0;        // feeder-wide rating at the threshold
    double alpha = 0.0;           // multiplier on the base ratings
    double base_per_system_kw = 0.0;
    int binding_bus = 0;          // first violating bus just above the threshold
    int binding_hour = 0;
    int binding_phase = 0;
};

/// Largest uniform PV rating before any bus-phase exceeds v_max under exact
/// power flow on the chosen day, by bisection to tol_kw on the per-system
/// rating. ESS schedules stay fixed while PV scales.
HostingResult hosting_capacity(const Network& net, const ProfileSet& profiles, const TimeGrid& grid,
                               int day_id, std::span<const Placement> placements, double tol_kw = 0.01);

/// Negative- over positive-sequence voltage ratio in percent at one bus.
/// nullopt when the positive-sequence magnitude vanishes.
std::optional<double> vuf(const PowerFlowSolution& sol, const Network& net, int bus_id);

struct VufStudy {
    double max_percent = 0.0;
    int max_bus = 0;
    int max_day = 0;
    int max_hour = 0;
    double avg_percent = 0.0;  // day-weighted over three-phase buses and hours
};

/// Exact power flow over every represented hour; VUF at every three-phase bus.
VufStudy vuf_study(const Network& net, const ProfileSet& profiles, const TimeGrid& grid,
                   std::span<const Placement> placements, int jobs = 1);

struct IndexReport {
    double annual_loss_kwh = 0.0;
    std::vector<std::pair<std::string, double>> seasonal_loss_kwh;
    double hosting_kw = 0.0;
    double hosting_per_unit_rating_kw = 0.0;
    int hosting_binding_bus = 0;  // 0 when hosting was not evaluated
    int hosting_binding_hour = 0;
    double vuf_max_percent = 0.0;
    int vuf_max_bus = 0;
    int vuf_max_hour = 0;
    double vuf_avg_percent = 0.0;
    double vuf_reference_percent = 2.0;

    bool consistent() const;  // annual == sum seasonal, values in range
};

IndexReport build_index_report(const Network& net, const ProfileSet& profiles, const TimeGrid& grid,
                               std::span<const Placement> placements, int hosting_day,
                               double hosting_tol_kw, double vuf_reference_percent, int jobs = 1);

/// Report CSV (one row per index) and the VUF time-series CSV.
std::string index_report_csv(const IndexReport& report);
std::string vuf_series_csv(const Network& net, const ProfileSet& profiles, const TimeGrid& grid,
                           std::span<const Placement> placements);

}  // namespace gridstor
