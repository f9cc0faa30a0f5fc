#include "gridstor/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace gridstor {

bool PhaseTriple::all_finite() const {
    return std::isfinite(a) && std::isfinite(b) && std::isfinite(c);
}

int Network::bus_index(int bus_id) const {
    for (int i = 0; i < n_buses(); ++i) {
        if (buses[i].id == bus_id) return i;
    }
    return -1;
}

ParseError::ParseError(int line_no, const std::string& what_arg)
    : std::runtime_error("line " + std::to_string(line_no) + ": " + what_arg), line(line_no) {}

namespace {

// "ABC" subset token; "-" means empty.
std::array<bool, 3> parse_phase_set(const std::string& tok, int line_no) {
    std::array<bool, 3> out{false, false, false};
    if (tok == "-") return out;
    for (char ch : tok) {
        switch (ch) {
            case 'A': out[0] = true; break;
            case 'B': out[1] = true; break;
            case 'C': out[2] = true; break;
            default:
                throw ParseError(line_no, "bad phase set '" + tok + "'");
        }
    }
    return out;
}

std::string format_phase_set(const std::array<bool, 3>& set) {
    std::string s;
    for (int f = 0; f < 3; ++f) {
        if (set[f]) s.push_back(phase_letter(f));
    }
    return s.empty() ? "-" : s;
}

double parse_real(const std::string& tok, int line_no, const char* field) {
    try {
        size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        if (!std::isfinite(v)) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(line_no, std::string("bad ") + field + " value '" + tok + "'");
    }
}

int parse_int(const std::string& tok, int line_no, const char* field) {
    try {
        size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(line_no, std::string("bad ") + field + " value '" + tok + "'");
    }
}

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) {
        if (t.back() == '\r') t.pop_back();
        if (t.empty()) continue;
        if (t[0] == '#') break;
        toks.push_back(t);
    }
    return toks;
}

void check_network(const Network& net) {
    if (net.buses.empty()) throw ValidationError("network has no buses");
    std::unordered_set<int> ids;
    for (const Bus& b : net.buses) {
        if (!ids.insert(b.id).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        for (int f = 0; f < kNumPhases; ++f) {
            if ((b.has_load[f] || b.has_pv[f]) && !b.phases_present[f])
                throw ValidationError("bus " + std::to_string(b.id) + ": load/pv flag on absent phase " +
                                      std::string(1, phase_letter(f)));
        }
    }
    for (const Line& l : net.lines) {
        if (l.from_bus == l.to_bus)
            throw ValidationError("line with identical endpoints " + std::to_string(l.from_bus));
        if (!ids.count(l.from_bus) || !ids.count(l.to_bus))
            throw ValidationError("dangling line endpoint " + std::to_string(ids.count(l.from_bus) ? l.to_bus : l.from_bus));
        if (!l.resistance.all_finite() || !l.reactance.all_finite())
            throw ValidationError("non-finite line impedance");
        for (int f = 0; f < kNumPhases; ++f) {
            if (l.resistance[f] <= 0.0 || l.reactance[f] <= 0.0)
                throw ValidationError("line " + std::to_string(l.from_bus) + "-" + std::to_string(l.to_bus) +
                                      ": impedance must be positive on phase " + std::string(1, phase_letter(f)));
        }
    }
    if (!ids.count(net.substation_bus))
        throw ValidationError("substation bus " + std::to_string(net.substation_bus) + " not in BUS section");
    if (!(net.v_min < net.v_sub && net.v_sub < net.v_max))
        throw ValidationError("voltage limits must satisfy v_min < v_sub < v_max");
    if (net.base_voltage <= 0.0) throw ValidationError("base voltage must be positive");
    RadialReport rep = validate_radial(net);
    if (!rep.ok) throw ValidationError("network is not radial: " + rep.message);
}

}  // namespace

Network parse_network(std::istream& in) {
    Network net;
    enum class Section { none, bus, line, source } section = Section::none;
    bool have_source = false;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::vector<std::string> toks = tokenize(raw);
        if (toks.empty()) continue;
        if (toks[0] == "[BUS]") { section = Section::bus; continue; }
        if (toks[0] == "[LINE]") { section = Section::line; continue; }
        if (toks[0] == "[SOURCE]") { section = Section::source; continue; }
        if (toks[0][0] == '[') throw ParseError(line_no, "unknown section " + toks[0]);
        switch (section) {
            case Section::none:
                throw ParseError(line_no, "record before any section header");
            case Section::bus: {
                if (toks.size() != 5) throw ParseError(line_no, "BUS record needs 5 fields");
                Bus b;
                b.id = parse_int(toks[0], line_no, "bus id");
                b.phases_present = parse_phase_set(toks[1], line_no);
                b.has_load = parse_phase_set(toks[2], line_no);
                b.has_pv = parse_phase_set(toks[3], line_no);
                int cand = parse_int(toks[4], line_no, "ess_candidate");
                if (cand != 0 && cand != 1) throw ParseError(line_no, "ess_candidate must be 0 or 1");
                b.ess_candidate = cand == 1;
                net.buses.push_back(b);
                break;
            }
            case Section::line: {
                if (toks.size() != 8) throw ParseError(line_no, "LINE record needs 8 fields");
                Line l;
                l.from_bus = parse_int(toks[0], line_no, "from bus");
                l.to_bus = parse_int(toks[1], line_no, "to bus");
                l.resistance = {parse_real(toks[2], line_no, "Ra"), parse_real(toks[3], line_no, "Rb"),
                                parse_real(toks[4], line_no, "Rc")};
                l.reactance = {parse_real(toks[5], line_no, "Xa"), parse_real(toks[6], line_no, "Xb"),
                               parse_real(toks[7], line_no, "Xc")};
                net.lines.push_back(l);
                break;
            }
            case Section::source: {
                if (toks.size() != 5) throw ParseError(line_no, "SOURCE record needs 5 fields");
                if (have_source) throw ParseError(line_no, "duplicate SOURCE record");
                net.substation_bus = parse_int(toks[0], line_no, "source bus");
                net.v_sub = parse_real(toks[1], line_no, "v_sub");
                net.v_min = parse_real(toks[2], line_no, "v_min");
                net.v_max = parse_real(toks[3], line_no, "v_max");
                net.base_voltage = parse_real(toks[4], line_no, "base_voltage");
                have_source = true;
                break;
            }
        }
    }
    if (!have_source) throw ValidationError("missing SOURCE record");
    check_network(net);
    return net;
}

Network parse_network_string(const std::string& text) {
    std::istringstream ss(text);
    return parse_network(ss);
}

std::string serialize_network(const Network& net) {
    std::ostringstream out;
    char buf[128];
    out << "[BUS]\n";
    for (const Bus& b : net.buses) {
        out << b.id << ' ' << format_phase_set(b.phases_present) << ' ' << format_phase_set(b.has_load)
            << ' ' << format_phase_set(b.has_pv) << ' ' << (b.ess_candidate ? 1 : 0) << '\n';
    }
    out << "[LINE]\n";
    for (const Line& l : net.lines) {
        out << l.from_bus << ' ' << l.to_bus;
        for (int f = 0; f < 3; ++f) { std::snprintf(buf, sizeof buf, " %.10g", l.resistance[f]); out << buf; }
        for (int f = 0; f < 3; ++f) { std::snprintf(buf, sizeof buf, " %.10g", l.reactance[f]); out << buf; }
        out << '\n';
    }
    out << "[SOURCE]\n";
    std::snprintf(buf, sizeof buf, "%d %.10g %.10g %.10g %.10g\n", net.substation_bus, net.v_sub, net.v_min,
                  net.v_max, net.base_voltage);
    out << buf;
    return out.str();
}

RadialReport validate_radial(const Network& net) {
    RadialReport rep;
    const int n = net.n_buses();
    int root = net.bus_index(net.substation_bus);
    if (root < 0) {
        rep.message = "substation bus not present";
        return rep;
    }

    std::unordered_map<int, int> index;
    for (int i = 0; i < n; ++i) index[net.buses[i].id] = i;
    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor bus index, line index)
    for (int li = 0; li < net.n_lines(); ++li) {
        const Line& l = net.lines[li];
        auto fi = index.find(l.from_bus);
        auto ti = index.find(l.to_bus);
        if (fi == index.end() || ti == index.end()) {
            rep.message = "dangling line endpoint";
            return rep;
        }
        adj[fi->second].push_back({ti->second, li});
        adj[ti->second].push_back({fi->second, li});
    }

    // BFS from the substation; a revisit through a different line marks a cycle.
    std::vector<int> seen(n, 0);
    std::vector<int> via_line(n, -1);
    std::vector<int> queue{root};
    seen[root] = 1;
    size_t head = 0;
    while (head < queue.size()) {
        int u = queue[head++];
        for (auto [v, li] : adj[u]) {
            if (li == via_line[u]) continue;
            if (seen[v]) {
                rep.cycle_lines.push_back({net.lines[li].from_bus, net.lines[li].to_bus});
                continue;
            }
            seen[v] = 1;
            via_line[v] = li;
            queue.push_back(v);
        }
    }
    for (int i = 0; i < n; ++i) {
        if (!seen[i]) rep.disconnected_buses.push_back(net.buses[i].id);
    }
    // Parallel lines between the same pair traverse as cycles above; double
    // count within one component also shows as |E| != |V|-1.
    bool count_ok = net.n_lines() == n - 1;
    rep.ok = rep.cycle_lines.empty() && rep.disconnected_buses.empty() && count_ok;
    if (!rep.ok) {
        std::ostringstream msg;
        if (!rep.cycle_lines.empty()) {
            msg << rep.cycle_lines.size() << " cycle-closing line(s):";
            for (auto& [f, t] : rep.cycle_lines) msg << ' ' << f << '-' << t;
            msg << "; ";
        }
        if (!rep.disconnected_buses.empty()) {
            msg << rep.disconnected_buses.size() << " disconnected bus(es):";
            for (int id : rep.disconnected_buses) msg << ' ' << id;
            msg << "; ";
        }
        if (count_ok && rep.cycle_lines.empty() && rep.disconnected_buses.empty())
            msg << "line/bus count mismatch";
        rep.message = msg.str();
    }
    return rep;
}

Topology build_topology(const Network& net) {
    RadialReport rep = validate_radial(net);
    if (!rep.ok) throw ValidationError("network is not radial: " + rep.message);

    const int n = net.n_buses();
    const int m = net.n_lines();
    Topology topo;
    topo.parent_bus.assign(n, -1);
    topo.parent_line.assign(n, -1);
    topo.depth.assign(n, 0);
    topo.child_bus.assign(m, -1);
    topo.upstream_bus.assign(m, -1);
    topo.child_lines.assign(n, {});

    std::unordered_map<int, int> index;
    for (int i = 0; i < n; ++i) index[net.buses[i].id] = i;
    std::vector<std::vector<std::pair<int, int>>> adj(n);
    for (int li = 0; li < m; ++li) {
        int f = index.at(net.lines[li].from_bus);
        int t = index.at(net.lines[li].to_bus);
        adj[f].push_back({t, li});
        adj[t].push_back({f, li});
    }

    int root = net.bus_index(net.substation_bus);
    std::vector<char> seen(n, 0);
    topo.order.push_back(root);
    seen[root] = 1;
    for (size_t head = 0; head < topo.order.size(); ++head) {
        int u = topo.order[head];
        for (auto [v, li] : adj[u]) {
            if (seen[v]) continue;
            seen[v] = 1;
            topo.parent_bus[v] = u;
            topo.parent_line[v] = li;
            topo.depth[v] = topo.depth[u] + 1;
            topo.child_bus[li] = v;
            topo.upstream_bus[li] = u;
            topo.child_lines[u].push_back(li);
            topo.order.push_back(v);
        }
    }
    return topo;
}

std::vector<std::vector<int>> downstream_sets(const Network& net) {
    Topology topo = build_topology(net);
    const int m = net.n_lines();
    std::vector<std::vector<int>> sets(m);
    // Children before parents: walk the BFS order backwards and merge.
    for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
        int bus = *it;
        int li = topo.parent_line[bus];
        if (li < 0) continue;
        sets[li].push_back(bus);
        for (int cl : topo.child_lines[bus]) {
            sets[li].insert(sets[li].end(), sets[cl].begin(), sets[cl].end());
        }
    }
    for (auto& s : sets) std::sort(s.begin(), s.end());
    return sets;
}

}  // namespace gridstor
