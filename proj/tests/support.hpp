#pragma once

// Shared fixtures and small oracles for the test suites.

#include <random>
#include <vector>

#include "gridstor/netmodel.hpp"
#include "gridstor/powerflow.hpp"
#include "gridstor/profiles.hpp"

namespace gridstor::testing {

inline Bus make_bus(int id, bool load = false, bool pv = false, bool candidate = false) {
    Bus b;
    b.id = id;
    b.has_load = {load, load, load};
    b.has_pv = {pv, pv, pv};
    b.ess_candidate = candidate;
    return b;
}

inline Line make_line(int from, int to, double r, double x) {
    Line l;
    l.from_bus = from;
    l.to_bus = to;
    l.resistance = {r, r, r};
    l.reactance = {x, x, x};
    return l;
}

/// Substation 1 feeding bus 2 over one line; 230 V nominal, -6 %/+10 % limits.
inline Network two_bus_feeder(double r = 0.1, double x = 0.1) {
    Network net;
    net.buses = {make_bus(1), make_bus(2, true, true, true)};
    net.lines = {make_line(1, 2, r, x)};
    net.substation_bus = 1;
    net.v_sub = 230.0;
    net.v_min = 216.2;
    net.v_max = 253.0;
    net.base_voltage = 230.0;
    return net;
}

/// Chain 1-2-3.
inline Network chain3_feeder(double r = 0.1, double x = 0.1) {
    Network net = two_bus_feeder(r, x);
    net.buses.push_back(make_bus(3, true, true, true));
    net.lines.push_back(make_line(2, 3, r, x));
    return net;
}

/// One-day grid standing in for the whole year; arbitrary horizon length.
inline TimeGrid single_day_grid(int hours = 24) {
    TimeGrid grid;
    grid.hours_per_day = hours;
    grid.days = {{0, "summer", 365.0}};
    return grid;
}

/// Two seasonal days; used where four would only cost time.
inline TimeGrid two_day_grid(int hours = 24) {
    TimeGrid grid;
    grid.hours_per_day = hours;
    grid.days = {{0, "summer", 183.0}, {1, "winter", 182.0}};
    return grid;
}

/// Uniform constant-load profiles on every flagged (bus, phase).
inline ProfileSet constant_profiles(const Network& net, const TimeGrid& grid, double p_load_kw,
                                    double q_load_kvar = 0.0) {
    ProfileSet out(grid.n_days(), grid.hours_per_day, net.n_buses());
    for (int d = 0; d < grid.n_days(); ++d)
        for (int h = 0; h < grid.hours_per_day; ++h)
            for (int b = 0; b < net.n_buses(); ++b)
                for (int f = 0; f < kNumPhases; ++f)
                    if (net.buses[b].has_load[f]) out.set_load(d, h, b, f, p_load_kw, q_load_kvar);
    return out;
}

/// Random radial tree: bus ids 1..n, parent of bus k drawn among 1..k-1.
inline Network random_tree_feeder(std::mt19937_64& rng, int n_buses, double r_lo = 0.02,
                                  double r_hi = 0.08) {
    Network net;
    net.substation_bus = 1;
    net.v_sub = 230.0;
    net.v_min = 207.0;
    net.v_max = 253.0;
    net.base_voltage = 230.0;
    std::uniform_real_distribution<double> imp(r_lo, r_hi);
    for (int id = 1; id <= n_buses; ++id) net.buses.push_back(make_bus(id, id > 1, id > 1));
    for (int id = 2; id <= n_buses; ++id) {
        std::uniform_int_distribution<int> parent(1, id - 1);
        net.lines.push_back(make_line(parent(rng), id, imp(rng), imp(rng)));
    }
    return net;
}

/// The reference desk feeder: 12 buses, mixed single-phase load/PV flags so
/// the phases load unevenly. Main 1-2-3-4-5-6 with laterals.
inline Network desk12_feeder() {
    Network net;
    net.substation_bus = 1;
    net.v_sub = 230.0;
    net.v_min = 216.2;
    net.v_max = 253.0;
    net.base_voltage = 230.0;

    auto flags = [](const char* s) {
        std::array<bool, 3> out{false, false, false};
        for (const char* p = s; *p; ++p) {
            if (*p == 'A') out[0] = true;
            if (*p == 'B') out[1] = true;
            if (*p == 'C') out[2] = true;
        }
        return out;
    };
    struct Spec {
        int id;
        const char* load;
        const char* pv;
        bool cand;
    };
    const Spec specs[] = {
        {1, "", "", false},    {2, "ABC", "A", false}, {3, "AB", "AB", false}, {4, "ABC", "ABC", true},
        {5, "BC", "B", false}, {6, "ABC", "C", true},  {7, "A", "A", false},   {8, "B", "AB", false},
        {9, "C", "C", false},  {10, "AB", "BC", true}, {11, "BC", "ABC", false}, {12, "ABC", "ABC", true},
    };
    for (const Spec& s : specs) {
        Bus b;
        b.id = s.id;
        b.has_load = flags(s.load);
        b.has_pv = flags(s.pv);
        b.ess_candidate = s.cand;
        net.buses.push_back(b);
    }
    const double r = 0.035, x = 0.025;
    net.lines = {
        make_line(1, 2, r, x),       make_line(2, 3, r, x),       make_line(3, 4, 1.2 * r, x),
        make_line(4, 5, r, 0.8 * x), make_line(5, 6, 1.1 * r, x), make_line(3, 7, 0.8 * r, 0.7 * x),
        make_line(7, 8, r, x),       make_line(4, 9, 0.9 * r, x), make_line(5, 10, r, x),
        make_line(10, 11, 1.3 * r, x), make_line(6, 12, r, 0.9 * x),
    };
    return net;
}

/// Seasonal profiles for the desk feeder with pronounced midday PV export.
inline ProfileSet desk12_profiles(const Network& net, const TimeGrid& grid, double pv_rating_kw = 4.0,
                                  double load_scale = 1.0) {
    SynthParams params = default_synth_params(pv_rating_kw);
    for (SeasonShape& s : params.seasons) {
        s.peak_load_kw = load_scale * (s.season == "winter" ? 2.2 : 1.6);
        s.base_load_kw = load_scale * (s.season == "winter" ? 0.5 : 0.3);
    }
    params.load_jitter = 0.3;
    return synth_profiles(20240711, net, grid, params);
}

}  // namespace gridstor::testing
