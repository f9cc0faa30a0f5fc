#include "gridstor/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <thread>

namespace gridstor {

namespace {

void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    const int workers = std::min(jobs, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (int i = w; i < n; i += workers) body(i);
        });
    }
    for (std::thread& t : pool) t.join();
}

}  // namespace

Injection apply_ess(const Network& net, Injection inj, std::span<const Placement> placements, int day_id,
                    int hour) {
    for (const Placement& pl : placements) {
        const int bus = net.bus_index(pl.bus_id);
        if (bus < 0) throw ValidationError("placement bus " + std::to_string(pl.bus_id) + " not in network");
        if (!net.buses[bus].three_phase())
            throw ValidationError("three-phase storage requires all phases at bus " + std::to_string(pl.bus_id));
        const auto it = pl.schedules.find(day_id);
        if (it == pl.schedules.end()) continue;  // no schedule for this day: idle
        const EssSchedule& sched = it->second;
        if (hour < 0 || hour >= sched.n_hours())
            throw ValidationError("schedule for bus " + std::to_string(pl.bus_id) + " lacks hour " +
                                  std::to_string(hour));
        const double rate = sched.p_plus[hour] - sched.p_minus[hour];  // kW per phase, charging positive
        for (int f = 0; f < kNumPhases; ++f) inj.p_at(bus, f) += rate;
    }
    return inj;
}

SeasonalLosses annual_losses(const Network& net, const ProfileSet& profiles, const TimeGrid& grid,
                             std::span<const Placement> placements, int jobs) {
    grid.validate();
    const int n_days = grid.n_days();
    const int T = grid.hours_per_day;
    std::vector<double> hourly_loss(static_cast<size_t>(n_days) * T, 0.0);
    std::vector<int> failed(static_cast<size_t>(n_days) * T, 0);

    parallel_for(n_days * T, jobs, [&](int k) {
        const int d = k / T;
        const int h = k % T;
        Injection inj = apply_ess(net, injection_from_profiles(net, profiles, d, h), placements,
                                  grid.days[d].day_id, h);
        const PowerFlowSolution sol = solve_exact(net, inj);
        if (!sol.converged) {
            failed[k] = 1;
            return;
        }
        hourly_loss[k] = sol.total_loss_kw;
    });

    for (int k = 0; k < n_days * T; ++k) {
        if (failed[k])
            throw std::runtime_error("power flow did not converge at day " +
                                     std::to_string(grid.days[k / T].day_id) + " hour " +
                                     std::to_string(k % T));
    }

    SeasonalLosses out;
    for (int d = 0; d < n_days; ++d) {
        double daily = 0.0;
        for (int h = 0; h < T; ++h) daily += hourly_loss[d * T + h] * grid.delta_t;
        const double seasonal = grid.days[d].weight_days * daily;
        out.per_season_kwh.push_back({grid.days[d].season, seasonal});
        out.annual_kwh += seasonal;
    }
    return out;
}

namespace {

struct SweepViolation {
    bool violated = false;
    int bus = 0, hour = 0, phase = 0;
};

// Upper-limit scan over one day at a given PV scaling. Losing power-flow
// convergence means the search left the solvable region without meeting the
// limit, which ends the search.
SweepViolation sweep_day(const Network& net, const ProfileSet& profiles, const TimeGrid& grid, int day_pos,
                         int day_id, std::span<const Placement> placements, double alpha) {
    const ProfileSet scaled = scale_pv(profiles, {alpha});
    SweepViolation out;
    for (int h = 0; h < grid.hours_per_day && !out.violated; ++h) {
        Injection inj =
            apply_ess(net, injection_from_profiles(net, scaled, day_pos, h), placements, day_id, h);
        const PowerFlowSolution sol = solve_exact(net, inj);
        if (!sol.converged)
            throw std::runtime_error(
                "hosting search bound exhausted: power flow stopped converging before any voltage "
                "violation");
        for (int b = 0; b < net.n_buses() && !out.violated; ++b) {
            for (int f = 0; f < kNumPhases; ++f) {
                if (std::abs(sol.v_at(b, f)) > net.v_max) {
                    out.violated = true;
                    out.bus = net.buses[b].id;
                    out.hour = h;
                    out.phase = f;
                    break;
                }
            }
        }
    }
    return out;
}

}  // namespace

HostingResult hosting_capacity(const Network& net, const ProfileSet& profiles, const TimeGrid& grid,
                               int day_id, std::span<const Placement> placements, double tol_kw) {
    grid.validate();
    if (!(tol_kw > 0.0)) throw ValidationError("hosting tolerance must be positive");
    const int day_pos = grid.day_pos(day_id);
    if (day_pos < 0) throw ValidationError("hosting day " + std::to_string(day_id) + " not in grid");

    // Base per-system rating: peak daily output of each flagged PV system.
    int n_sys = 0;
    double total_rating = 0.0;
    for (int b = 0; b < net.n_buses(); ++b) {
        for (int f = 0; f < kNumPhases; ++f) {
            if (!net.buses[b].has_pv[f]) continue;
            double peak = 0.0;
            for (int h = 0; h < grid.hours_per_day; ++h)
                peak = std::max(peak, profiles.p_pv(day_pos, h, b, f));
            ++n_sys;
            total_rating += peak;
        }
    }
    if (n_sys == 0 || total_rating <= 0.0)
        throw ValidationError("hosting sweep needs at least one PV system with nonzero output");
    const double per_system_base = total_rating / n_sys;

    if (sweep_day(net, profiles, grid, day_pos, day_id, placements, 1.0).violated)
        throw std::runtime_error("hosting base case already violates the voltage limit");

    // Bracket the threshold, then bisect to tol_kw on the per-system rating.
    double lo = 1.0, hi = 2.0;
    SweepViolation binding;
    constexpr double kAlphaCap = 1048576.0;
    while (true) {
        const SweepViolation v = sweep_day(net, profiles, grid, day_pos, day_id, placements, hi);
        if (v.violated) {
            binding = v;
            break;
        }
        lo = hi;
        hi *= 2.0;
        if (hi > kAlphaCap) throw std::runtime_error("hosting search bound exhausted");
    }
    while ((hi - lo) * per_system_base > tol_kw) {
        const double mid = 0.5 * (lo + hi);
        const SweepViolation v = sweep_day(net, profiles, grid, day_pos, day_id, placements, mid);
        if (v.violated) {
            binding = v;
            hi = mid;
        } else {
            lo = mid;
        }
    }

    HostingResult res;
    res.alpha = lo;
    res.per_system_kw = lo * per_system_base;
    res.total_kw = lo * total_rating;
    res.base_per_system_kw = per_system_base;
    res.binding_bus = binding.bus;
    res.binding_hour = binding.hour;
    res.binding_phase = binding.phase;
    return res;
}

std::optional<double> vuf(const PowerFlowSolution& sol, const Network& net, int bus_id) {
    const int bus = net.bus_index(bus_id);
    if (bus < 0) throw ValidationError("vuf: unknown bus " + std::to_string(bus_id));
    if (!net.buses[bus].three_phase())
        throw ValidationError("vuf: bus " + std::to_string(bus_id) + " is not three-phase");
    const std::complex<double> a = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
    const std::complex<double> a2 = a * a;
    const std::complex<double> va = sol.v_at(bus, kPhaseA);
    const std::complex<double> vb = sol.v_at(bus, kPhaseB);
    const std::complex<double> vc = sol.v_at(bus, kPhaseC);
    const double vpos = std::abs(va + a * vb + a2 * vc) / 3.0;
    const double vneg = std::abs(va + a2 * vb + a * vc) / 3.0;
    if (vpos <= 1e-12 * (std::abs(va) + std::abs(vb) + std::abs(vc) + 1e-300)) return std::nullopt;
    return 100.0 * vneg / vpos;
}

VufStudy vuf_study(const Network& net, const ProfileSet& profiles, const TimeGrid& grid,
                   std::span<const Placement> placements, int jobs) {
    grid.validate();
    const int n_days = grid.n_days();
    const int T = grid.hours_per_day;

    std::vector<int> tri_buses;
    for (int b = 0; b < net.n_buses(); ++b)
        if (net.buses[b].three_phase()) tri_buses.push_back(b);
    if (tri_buses.empty()) throw ValidationError("vuf study needs at least one three-phase bus");

    std::vector<std::vector<double>> per_hour(static_cast<size_t>(n_days) * T);
    std::vector<int> failed(static_cast<size_t>(n_days) * T, 0);
    parallel_for(n_days * T, jobs, [&](int k) {
        const int d = k / T;
        const int h = k % T;
        Injection inj = apply_ess(net, injection_from_profiles(net, profiles, d, h), placements,
                                  grid.days[d].day_id, h);
        const PowerFlowSolution sol = solve_exact(net, inj);
        if (!sol.converged) {
            failed[k] = 1;
            return;
        }
        std::vector<double>& row = per_hour[k];
        row.resize(tri_buses.size(), 0.0);
        for (size_t i = 0; i < tri_buses.size(); ++i) {
            const auto v = vuf(sol, net, net.buses[tri_buses[i]].id);
            row[i] = v.value_or(0.0);
        }
    });
    for (int k = 0; k < n_days * T; ++k)
        if (failed[k])
            throw std::runtime_error("power flow did not converge at day " +
                                     std::to_string(grid.days[k / T].day_id) + " hour " +
                                     std::to_string(k % T));

    VufStudy out;
    double weighted_sum = 0.0, weight_total = 0.0;
    for (int d = 0; d < n_days; ++d) {
        for (int h = 0; h < T; ++h) {
            const std::vector<double>& row = per_hour[d * T + h];
            for (size_t i = 0; i < tri_buses.size(); ++i) {
                if (row[i] > out.max_percent) {
                    out.max_percent = row[i];
                    out.max_bus = net.buses[tri_buses[i]].id;
                    out.max_day = grid.days[d].day_id;
                    out.max_hour = h;
                }
                weighted_sum += grid.days[d].weight_days * row[i];
            }
            weight_total += grid.days[d].weight_days * static_cast<double>(tri_buses.size());
        }
    }
    out.avg_percent = weight_total > 0.0 ? weighted_sum / weight_total : 0.0;
    return out;
}

bool IndexReport::consistent() const {
    double seasonal_sum = 0.0;
    for (const auto& [season, kwh] : seasonal_loss_kwh) seasonal_sum += kwh;
    if (std::abs(seasonal_sum - annual_loss_kwh) > 1e-6 * std::max(1.0, std::abs(annual_loss_kwh)))
        return false;
    return hosting_kw >= 0.0 && vuf_max_percent >= 0.0 && vuf_avg_percent >= 0.0;
}

IndexReport build_index_report(const Network& net, const ProfileSet& profiles, const TimeGrid& grid,
                               std::span<const Placement> placements, int hosting_day,
                               double hosting_tol_kw, double vuf_reference_percent, int jobs) {
    IndexReport rep;
    const SeasonalLosses losses = annual_losses(net, profiles, grid, placements, jobs);
    rep.annual_loss_kwh = losses.annual_kwh;
    rep.seasonal_loss_kwh = losses.per_season_kwh;
    const HostingResult hosting =
        hosting_capacity(net, profiles, grid, hosting_day, placements, hosting_tol_kw);
    rep.hosting_kw = hosting.total_kw;
    rep.hosting_per_unit_rating_kw = hosting.per_system_kw;
    rep.hosting_binding_bus = hosting.binding_bus;
    rep.hosting_binding_hour = hosting.binding_hour;
    const VufStudy study = vuf_study(net, profiles, grid, placements, jobs);
    rep.vuf_max_percent = study.max_percent;
    rep.vuf_max_bus = study.max_bus;
    rep.vuf_max_hour = study.max_hour;
    rep.vuf_avg_percent = study.avg_percent;
    rep.vuf_reference_percent = vuf_reference_percent;
    return rep;
}

std::string index_report_csv(const IndexReport& report) {
    std::ostringstream out;
    char buf[160];
    out << "index,value,units,detail\n";
    std::snprintf(buf, sizeof buf, "annual_loss,%.9g,kWh,\n", report.annual_loss_kwh);
    out << buf;
    for (const auto& [season, kwh] : report.seasonal_loss_kwh) {
        std::snprintf(buf, sizeof buf, "seasonal_loss_%s,%.9g,kWh,\n", season.c_str(), kwh);
        out << buf;
    }
    if (report.hosting_binding_bus != 0) {
        std::snprintf(buf, sizeof buf, "hosting_total,%.9g,kW,binds at bus=%d hour=%d\n",
                      report.hosting_kw, report.hosting_binding_bus, report.hosting_binding_hour);
    } else {
        std::snprintf(buf, sizeof buf, "hosting_total,%.9g,kW,\n", report.hosting_kw);
    }
    out << buf;
    std::snprintf(buf, sizeof buf, "hosting_per_system,%.9g,kW,\n", report.hosting_per_unit_rating_kw);
    out << buf;
    std::snprintf(buf, sizeof buf, "vuf_max,%.9g,percent,bus=%d hour=%d\n", report.vuf_max_percent,
                  report.vuf_max_bus, report.vuf_max_hour);
    out << buf;
    std::snprintf(buf, sizeof buf, "vuf_avg,%.9g,percent,over three-phase buses and weighted hours\n",
                  report.vuf_avg_percent);
    out << buf;
    std::snprintf(buf, sizeof buf, "vuf_reference,%.9g,percent,configured threshold\n",
                  report.vuf_reference_percent);
    out << buf;
    return out.str();
}

std::string vuf_series_csv(const Network& net, const ProfileSet& profiles, const TimeGrid& grid,
                           std::span<const Placement> placements) {
    std::ostringstream out;
    out << "day,hour,bus,vuf_percent\n";
    char buf[96];
    for (int d = 0; d < grid.n_days(); ++d) {
        for (int h = 0; h < grid.hours_per_day; ++h) {
            Injection inj = apply_ess(net, injection_from_profiles(net, profiles, d, h), placements,
                                      grid.days[d].day_id, h);
            const PowerFlowSolution sol = solve_exact(net, inj);
            if (!sol.converged)
                throw std::runtime_error("power flow did not converge at day " +
                                         std::to_string(grid.days[d].day_id) + " hour " + std::to_string(h));
            for (int b = 0; b < net.n_buses(); ++b) {
                if (!net.buses[b].three_phase()) continue;
                const auto v = vuf(sol, net, net.buses[b].id);
                std::snprintf(buf, sizeof buf, "%d,%d,%d,%.9g\n", grid.days[d].day_id, h, net.buses[b].id,
                              v.value_or(0.0));
                out << buf;
            }
        }
    }
    return out.str();
}

}  // namespace gridstor
