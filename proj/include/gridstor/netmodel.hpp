#pragma once

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridstor {

// Phase indices used everywhere a per-phase quantity is stored.
inline constexpr int kPhaseA = 0;
inline constexpr int kPhaseB = 1;
inline constexpr int kPhaseC = 2;
inline constexpr int kNumPhases = 3;

inline constexpr char phase_letter(int phase) {
    return phase == kPhaseA ? 'A' : phase == kPhaseB ? 'B' : 'C';
}

/// One value per phase (volts, watts, ohms -- depends on context).
struct PhaseTriple {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double& operator[](int phase) { return phase == 0 ? a : phase == 1 ? b : c; }
    double operator[](int phase) const { return phase == 0 ? a : phase == 1 ? b : c; }

    bool all_finite() const;
};

struct Bus {
    int id = 0;
    std::array<bool, kNumPhases> phases_present{true, true, true};
    std::array<bool, kNumPhases> has_load{false, false, false};
    std::array<bool, kNumPhases> has_pv{false, false, false};
    bool ess_candidate = false;

    bool three_phase() const {
        return phases_present[0] && phases_present[1] && phases_present[2];
    }
};

/// Three-phase line segment. Phases are mutually decoupled; every line
/// carries all three phases even when a bus serves single-phase consumers.
struct Line {
    int from_bus = 0;
    int to_bus = 0;
    PhaseTriple resistance;  // ohms per phase
    PhaseTriple reactance;   // ohms per phase
};

struct Network {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    int substation_bus = 0;
    double v_sub = 0.0;         // volts, phase to neutral
    double v_min = 0.0;         // volts
    double v_max = 0.0;         // volts
    double base_voltage = 0.0;  // volts, phase to neutral

    int n_buses() const { return static_cast<int>(buses.size()); }
    int n_lines() const { return static_cast<int>(lines.size()); }

    /// Index of a bus id within `buses`, or -1 when absent.
    int bus_index(int bus_id) const;
};

struct ParseError : std::runtime_error {
    ParseError(int line_no, const std::string& what_arg);
    int line = 0;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parse the sectioned feeder format ([BUS] / [LINE] / [SOURCE]) and check
/// all Network invariants, including radiality.
Network parse_network(std::istream& in);
Network parse_network_string(const std::string& text);

/// Inverse of parse_network; emits the same sectioned format.
std::string serialize_network(const Network& net);

struct RadialReport {
    bool ok = false;
    std::vector<int> disconnected_buses;            // bus ids unreachable from the substation
    std::vector<std::pair<int, int>> cycle_lines;   // (from,to) ids of lines closing or inside a cycle
    std::string message;
};

/// Tree check: |lines| == |buses|-1, connected from the substation, no cycles.
/// Violations are reported, never thrown.
RadialReport validate_radial(const Network& net);

/// Rooted-tree view of a radial network. Lines keep their file order; each
/// gets an orientation (parent -> child) relative to the substation.
struct Topology {
    std::vector<int> order;        // bus indices, parents before children, substation first
    std::vector<int> parent_bus;   // per bus index, -1 for the substation
    std::vector<int> parent_line;  // per bus index, line index toward the substation, -1 at root
    std::vector<int> depth;        // per bus index
    std::vector<int> child_bus;    // per line index, the endpoint away from the substation
    std::vector<int> upstream_bus; // per line index, the endpoint toward the substation
    std::vector<std::vector<int>> child_lines;  // per bus index, line indices feeding children
};

/// Throws ValidationError when the network is not radial.
Topology build_topology(const Network& net);

/// Per line index: sorted bus indices downstream of that line (child side
/// inclusive). Fails if the network is not radial.
std::vector<std::vector<int>> downstream_sets(const Network& net);

}  // namespace gridstor
