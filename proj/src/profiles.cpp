#include "gridstor/profiles.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace gridstor {

int TimeGrid::day_pos(int day_id) const {
    for (int d = 0; d < n_days(); ++d) {
        if (days[d].day_id == day_id) return d;
    }
    return -1;
}

void TimeGrid::validate() const {
    if (hours_per_day < 1) throw ValidationError("hours_per_day must be >= 1");
    if (!(delta_t > 0.0)) throw ValidationError("delta_t must be positive");
    if (days.empty()) throw ValidationError("time grid has no days");
    double total = 0.0;
    for (const RepDay& d : days) {
        if (d.weight_days < 0.0) throw ValidationError("negative day weight");
        if (day_pos(d.day_id) != (&d - days.data()))
            throw ValidationError("duplicate day id " + std::to_string(d.day_id));
        total += d.weight_days;
    }
    if (std::abs(total - 365.0) > 0.5)
        throw ValidationError("day weights sum to " + std::to_string(total) + ", expected 365");
}

TimeGrid default_time_grid() {
    TimeGrid grid;
    grid.days = {{0, "summer", 90.0}, {1, "autumn", 91.0}, {2, "winter", 92.0}, {3, "spring", 92.0}};
    return grid;
}

ProfileSet::ProfileSet(int n_days, int hours_per_day, int n_buses)
    : n_days_(n_days), hours_(hours_per_day), n_buses_(n_buses) {
    const size_t total = static_cast<size_t>(n_days) * hours_per_day * n_buses * kNumPhases;
    p_load_.assign(total, 0.0);
    q_load_.assign(total, 0.0);
    p_pv_.assign(total, 0.0);
    q_pv_.assign(total, 0.0);
}

void ProfileSet::set_load(int day, int hour, int bus, int phase, double p_kw, double q_kvar) {
    p_load_[idx(day, hour, bus, phase)] = p_kw;
    q_load_[idx(day, hour, bus, phase)] = q_kvar;
}

void ProfileSet::set_pv(int day, int hour, int bus, int phase, double p_kw, double q_kvar) {
    if (pv_alpha_ != 1.0) throw std::logic_error("set_pv on a scaled ProfileSet");
    p_pv_[idx(day, hour, bus, phase)] = p_kw;
    q_pv_[idx(day, hour, bus, phase)] = q_kvar;
}

namespace {

int parse_phase_letter(const std::string& tok) {
    if (tok == "A") return kPhaseA;
    if (tok == "B") return kPhaseB;
    if (tok == "C") return kPhaseC;
    return -1;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

constexpr const char* kProfileHeader = "bus,phase,day,hour,p_load_kw,q_load_kvar,p_pv_kw,q_pv_kvar";

}  // namespace

ProfileSet load_profiles(std::istream& csv, const Network& net, const TimeGrid& grid) {
    grid.validate();
    ProfileSet out(grid.n_days(), grid.hours_per_day, net.n_buses());

    std::string header;
    if (!std::getline(csv, header)) throw ValidationError("profile CSV is empty");
    if (split_csv(header) != split_csv(kProfileHeader))
        throw ValidationError("profile CSV header mismatch, expected '" + std::string(kProfileHeader) + "'");

    // rows seen per (bus index, phase, day position)
    std::map<std::tuple<int, int, int>, int> seen;
    std::string line;
    int line_no = 1;
    while (std::getline(csv, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> f = split_csv(line);
        if (f.size() != 8) throw ParseError(line_no, "expected 8 CSV fields");
        int bus_id, day_id, hour, phase;
        double pl, ql, ppv, qpv;
        try {
            bus_id = std::stoi(f[0]);
            phase = parse_phase_letter(f[1]);
            day_id = std::stoi(f[2]);
            hour = std::stoi(f[3]);
            pl = std::stod(f[4]);
            ql = std::stod(f[5]);
            ppv = std::stod(f[6]);
            qpv = std::stod(f[7]);
        } catch (const std::exception&) {
            throw ParseError(line_no, "malformed CSV record");
        }
        if (phase < 0) throw ParseError(line_no, "bad phase '" + f[1] + "'");
        int bus = net.bus_index(bus_id);
        if (bus < 0) throw ParseError(line_no, "unknown bus " + f[0]);
        int day = grid.day_pos(day_id);
        if (day < 0) throw ParseError(line_no, "unknown day " + f[2]);
        if (hour < 0 || hour >= grid.hours_per_day) throw ParseError(line_no, "hour out of range");
        if (!net.buses[bus].phases_present[phase])
            throw ParseError(line_no, "bus " + f[0] + " has no phase " + f[1]);
        if (pl < 0.0) throw ParseError(line_no, "negative load");
        if (ppv < 0.0) throw ParseError(line_no, "negative PV generation");
        out.set_load(day, hour, bus, phase, pl, ql);
        out.set_pv(day, hour, bus, phase, ppv, qpv);
        ++seen[{bus, phase, day}];
    }

    for (int bus = 0; bus < net.n_buses(); ++bus) {
        const Bus& b = net.buses[bus];
        for (int f = 0; f < kNumPhases; ++f) {
            if (!b.has_load[f] && !b.has_pv[f]) continue;
            for (int day = 0; day < grid.n_days(); ++day) {
                auto it = seen.find({bus, f, day});
                int have = it == seen.end() ? 0 : it->second;
                if (have == 0)
                    throw ValidationError("missing series for bus " + std::to_string(b.id) + " phase " +
                                          std::string(1, phase_letter(f)) + " day " +
                                          std::to_string(grid.days[day].day_id));
                if (have != grid.hours_per_day)
                    throw ValidationError("series length mismatch for bus " + std::to_string(b.id) + " phase " +
                                          std::string(1, phase_letter(f)) + " day " +
                                          std::to_string(grid.days[day].day_id) + ": " + std::to_string(have) +
                                          " of " + std::to_string(grid.hours_per_day) + " hours");
            }
        }
    }
    return out;
}

ProfileSet load_profiles_string(const std::string& csv, const Network& net, const TimeGrid& grid) {
    std::istringstream ss(csv);
    return load_profiles(ss, net, grid);
}

void save_profiles(std::ostream& out, const ProfileSet& profiles, const Network& net, const TimeGrid& grid) {
    out << kProfileHeader << '\n';
    char buf[160];
    for (int bus = 0; bus < net.n_buses(); ++bus) {
        const Bus& b = net.buses[bus];
        for (int f = 0; f < kNumPhases; ++f) {
            if (!b.has_load[f] && !b.has_pv[f]) continue;
            for (int day = 0; day < grid.n_days(); ++day) {
                for (int h = 0; h < grid.hours_per_day; ++h) {
                    std::snprintf(buf, sizeof buf, "%d,%c,%d,%d,%.10g,%.10g,%.10g,%.10g\n", b.id,
                                  phase_letter(f), grid.days[day].day_id, h, profiles.p_load(day, h, bus, f),
                                  profiles.q_load(day, h, bus, f), profiles.p_pv(day, h, bus, f),
                                  profiles.q_pv(day, h, bus, f));
                    out << buf;
                }
            }
        }
    }
}

std::string save_profiles_string(const ProfileSet& profiles, const Network& net, const TimeGrid& grid) {
    std::ostringstream ss;
    save_profiles(ss, profiles, net, grid);
    return ss.str();
}

namespace {

// splitmix64; stable across platforms, order-independent draws.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform01(std::uint64_t seed, std::uint64_t stream) {
    return static_cast<double>(mix64(seed ^ mix64(stream)) >> 11) * 0x1.0p-53;
}

// Overnight floor with a morning shoulder and a dominant evening peak.
double demand_shape(double hour) {
    double morning = 0.55 * std::exp(-0.5 * std::pow((hour - 8.0) / 1.6, 2));
    double evening = std::exp(-0.5 * std::pow((hour - 18.5) / 2.2, 2));
    return std::max(morning, evening);
}

}  // namespace

SynthParams default_synth_params(double pv_rating_kw) {
    SynthParams p;
    p.seasons = {
        {"summer", 0.9, 0.15, pv_rating_kw, 5, 19},
        {"autumn", 1.1, 0.20, 0.75 * pv_rating_kw, 6, 18},
        {"winter", 1.6, 0.30, 0.45 * pv_rating_kw, 8, 16},
        {"spring", 1.0, 0.18, 0.80 * pv_rating_kw, 6, 18},
    };
    return p;
}

ProfileSet synth_profiles(std::uint64_t seed, const Network& net, const TimeGrid& grid, const SynthParams& params) {
    grid.validate();
    if (grid.hours_per_day > 24) throw ValidationError("synth_profiles supports at most 24 hours per day");
    if (params.load_jitter < 0.0 || params.load_jitter >= 1.0)
        throw ValidationError("load_jitter must be in [0,1)");
    if (params.power_factor <= 0.0 || params.power_factor > 1.0)
        throw ValidationError("power_factor must be in (0,1]");

    ProfileSet out(grid.n_days(), grid.hours_per_day, net.n_buses());
    const double tan_phi = std::tan(std::acos(params.power_factor));

    for (int day = 0; day < grid.n_days(); ++day) {
        const SeasonShape* shape = nullptr;
        for (const SeasonShape& s : params.seasons) {
            if (s.season == grid.days[day].season) { shape = &s; break; }
        }
        if (!shape) throw ValidationError("no season parameters for '" + grid.days[day].season + "'");
        if (shape->base_load_kw < 0.0 || shape->peak_load_kw < shape->base_load_kw)
            throw ValidationError("season '" + shape->season + "': need 0 <= base <= peak load");
        if (shape->pv_rating_kw < 0.0) throw ValidationError("negative PV rating");
        if (shape->daylight_start > shape->daylight_end)
            throw ValidationError("season '" + shape->season + "': empty daylight window");

        const double center = 0.5 * (shape->daylight_start + shape->daylight_end);
        const double half_width = 0.5 * (shape->daylight_end - shape->daylight_start) + 1.0;

        for (int bus = 0; bus < net.n_buses(); ++bus) {
            const Bus& b = net.buses[bus];
            for (int f = 0; f < kNumPhases; ++f) {
                if (!b.phases_present[f]) continue;
                const std::uint64_t stream =
                    (static_cast<std::uint64_t>(static_cast<std::uint32_t>(b.id)) << 16) |
                    (static_cast<std::uint64_t>(day) << 4) | static_cast<std::uint64_t>(f);
                const double jitter =
                    1.0 + params.load_jitter * (2.0 * uniform01(seed, stream) - 1.0);
                for (int h = 0; h < grid.hours_per_day; ++h) {
                    if (b.has_load[f]) {
                        double p = (shape->base_load_kw +
                                    (shape->peak_load_kw - shape->base_load_kw) * demand_shape(h)) *
                                   jitter;
                        out.set_load(day, h, bus, f, p, p * tan_phi);
                    }
                    if (b.has_pv[f] && h >= shape->daylight_start && h <= shape->daylight_end) {
                        // cos(0) == 1 exactly, so the center hour emits the full rating.
                        double c = std::cos(0.5 * std::numbers::pi * (h - center) / half_width);
                        out.set_pv(day, h, bus, f, shape->pv_rating_kw * c * c, 0.0);
                    }
                }
            }
        }
    }
    return out;
}

ProfileSet scale_pv(const ProfileSet& profiles, const PvScaling& s) {
    if (!(s.alpha >= 0.0) || !std::isfinite(s.alpha))
        throw ValidationError("PV scaling must be finite and non-negative");
    ProfileSet out = profiles;
    out.apply_pv_scale(s.alpha);
    return out;
}

double annual_energy_kwh(const ProfileSet& profiles, const TimeGrid& grid) {
    double total = 0.0;
    for (int day = 0; day < profiles.n_days(); ++day) {
        double daily = 0.0;
        for (int h = 0; h < profiles.hours_per_day(); ++h) {
            for (int bus = 0; bus < profiles.n_buses(); ++bus) {
                for (int f = 0; f < kNumPhases; ++f) {
                    daily += profiles.p_load(day, h, bus, f) + profiles.p_pv(day, h, bus, f);
                }
            }
        }
        total += grid.days[day].weight_days * daily * grid.delta_t;
    }
    return total;
}

}  // namespace gridstor
