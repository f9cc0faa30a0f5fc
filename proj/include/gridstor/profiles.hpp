#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gridstor/netmodel.hpp"

namespace gridstor {

struct RepDay {
    int day_id = 0;
    std::string season;
    double weight_days = 0.0;  // days per year this day stands for
};

/// Representative-day time grid. Weights must sum to one year.
struct TimeGrid {
    int hours_per_day = 24;
    double delta_t = 1.0;  // hours
    std::vector<RepDay> days;

    int n_days() const { return static_cast<int>(days.size()); }
    int day_pos(int day_id) const;  // position within `days`, -1 if absent

    void validate() const;  // throws ValidationError
};

/// Default grid: four seasonal days weighted to 365.
TimeGrid default_time_grid();

/// Hourly per-(bus, phase, day) series in kW / kvar. Consumption positive;
/// p_pv is generation (subtracted when forming injections).
///
/// PV scaling is kept as a single multiplier applied on read, so repeated
/// scale_pv calls compose exactly.
class ProfileSet {
  public:
    ProfileSet() = default;
    ProfileSet(int n_days, int hours_per_day, int n_buses);

    int n_days() const { return n_days_; }
    int hours_per_day() const { return hours_; }
    int n_buses() const { return n_buses_; }
    double pv_alpha() const { return pv_alpha_; }

    double p_load(int day, int hour, int bus, int phase) const { return p_load_[idx(day, hour, bus, phase)]; }
    double q_load(int day, int hour, int bus, int phase) const { return q_load_[idx(day, hour, bus, phase)]; }
    double p_pv(int day, int hour, int bus, int phase) const { return pv_alpha_ * p_pv_[idx(day, hour, bus, phase)]; }
    double q_pv(int day, int hour, int bus, int phase) const { return pv_alpha_ * q_pv_[idx(day, hour, bus, phase)]; }

    void set_load(int day, int hour, int bus, int phase, double p_kw, double q_kvar);
    /// Only valid on an unscaled set (pv_alpha == 1).
    void set_pv(int day, int hour, int bus, int phase, double p_kw, double q_kvar);

    void apply_pv_scale(double alpha) { pv_alpha_ *= alpha; }

    bool operator==(const ProfileSet&) const = default;

  private:
    int idx(int day, int hour, int bus, int phase) const {
        return ((day * hours_ + hour) * n_buses_ + bus) * kNumPhases + phase;
    }
    int n_days_ = 0;
    int hours_ = 0;
    int n_buses_ = 0;
    double pv_alpha_ = 1.0;
    std::vector<double> p_load_, q_load_, p_pv_, q_pv_;
};

/// Uniform multiplier applied to every PV series.
struct PvScaling {
    double alpha = 1.0;
};

/// Per-season shape parameters for the synthetic generator.
struct SeasonShape {
    std::string season;
    double peak_load_kw = 1.0;   // evening peak per loaded phase
    double base_load_kw = 0.2;   // overnight floor per loaded phase
    double pv_rating_kw = 1.0;   // per PV system (bus, phase)
    int daylight_start = 6;      // first daylight hour (inclusive)
    int daylight_end = 18;       // last daylight hour (inclusive)
};

struct SynthParams {
    std::vector<SeasonShape> seasons;
    double power_factor = 0.95;  // lagging, applied to loads
    double load_jitter = 0.25;   // relative spread of per-(bus,phase,day) load multipliers
};

/// Four-season defaults: winter demand dominates, summer PV dominates.
SynthParams default_synth_params(double pv_rating_kw = 1.0);

/// Read the profile CSV (header: bus,phase,day,hour,p_load_kw,q_load_kvar,
/// p_pv_kw,q_pv_kvar). Every flagged (bus, phase) must have a full-length
/// series; unflagged entries default to zero.
ProfileSet load_profiles(std::istream& csv, const Network& net, const TimeGrid& grid);
ProfileSet load_profiles_string(const std::string& csv, const Network& net, const TimeGrid& grid);

/// Write every flagged series in the CSV format accepted by load_profiles.
void save_profiles(std::ostream& out, const ProfileSet& profiles, const Network& net, const TimeGrid& grid);
std::string save_profiles_string(const ProfileSet& profiles, const Network& net, const TimeGrid& grid);

/// Deterministic seeded generator: double-bump demand, bell-shaped PV inside
/// the daylight window, zero outside. The PV bell reaches pv_rating_kw
/// exactly at the window's center hour. Hour indices are hours of day, so
/// hours_per_day must be <= 24.
ProfileSet synth_profiles(std::uint64_t seed, const Network& net, const TimeGrid& grid, const SynthParams& params);

/// Multiply every p_pv (and q_pv) by s.alpha; loads untouched.
ProfileSet scale_pv(const ProfileSet& profiles, const PvScaling& s);

/// Sum of day-weighted hourly load plus PV energy, kWh per year.
double annual_energy_kwh(const ProfileSet& profiles, const TimeGrid& grid);

}  // namespace gridstor
