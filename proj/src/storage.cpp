#include "gridstor/storage.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "gridstor/netmodel.hpp"

namespace gridstor {

void EssSpec::validate() const {
    if (!(eta_plus > 0.0 && eta_plus <= 1.0) || !(eta_minus > 0.0 && eta_minus <= 1.0))
        throw ValidationError("efficiencies must lie in (0, 1]");
    if (p_max_charge < 0.0 || p_max_discharge < 0.0) throw ValidationError("rate limits must be >= 0");
    if (!(0.0 <= e_min && e_min <= e0 && e0 <= e_max))
        throw ValidationError("SoC window must satisfy 0 <= e_min <= e0 <= e_max");
}

std::vector<double> soc_trajectory(const EssSpec& spec, const EssSchedule& sched, double delta_t) {
    if (sched.p_plus.size() != sched.p_minus.size())
        throw ValidationError("schedule charge/discharge series differ in length");
    std::vector<double> e(sched.p_plus.size() + 1);
    e[0] = spec.e0;
    for (size_t t = 0; t < sched.p_plus.size(); ++t) {
        e[t + 1] = e[t] + 3.0 * (spec.eta_plus * sched.p_plus[t] - sched.p_minus[t] / spec.eta_minus) * delta_t;
    }
    return e;
}

CycleCheck check_cycle(const EssSpec& spec, const EssSchedule& sched, double delta_t, double tol_kwh) {
    CycleCheck chk;
    double net = 0.0;
    for (size_t t = 0; t < sched.p_plus.size(); ++t) {
        net += spec.eta_plus * sched.p_plus[t] - sched.p_minus[t] / spec.eta_minus;
    }
    chk.net_energy_kwh = 3.0 * net * delta_t;
    chk.ok = std::abs(chk.net_energy_kwh) <= tol_kwh;
    if (!chk.ok) {
        std::ostringstream msg;
        msg << "cycle does not return to e0: net energy " << chk.net_energy_kwh << " kWh";
        chk.message = msg.str();
    }
    return chk;
}

LimitCheck check_limits(const EssSpec& spec, const EssSchedule& sched, double delta_t) {
    LimitCheck chk;
    const bool lossless = spec.eta_plus == 1.0 && spec.eta_minus == 1.0;
    for (int t = 0; t < sched.n_hours(); ++t) {
        const double pp = sched.p_plus[t];
        const double pm = sched.p_minus[t];
        if (pp < 0.0) chk.violations.push_back({LimitViolation::Kind::negative_rate, t, pp, 0.0});
        if (pm < 0.0) chk.violations.push_back({LimitViolation::Kind::negative_rate, t, pm, 0.0});
        if (3.0 * pp > spec.p_max_charge)
            chk.violations.push_back({LimitViolation::Kind::charge_rate, t, 3.0 * pp, spec.p_max_charge});
        if (3.0 * pm > spec.p_max_discharge)
            chk.violations.push_back({LimitViolation::Kind::discharge_rate, t, 3.0 * pm, spec.p_max_discharge});
        if (pp > 0.0 && pm > 0.0) {
            chk.simultaneous_hours.push_back(t);
            if (!lossless)
                chk.violations.push_back({LimitViolation::Kind::simultaneous, t, pp * pm, 0.0});
        }
    }
    const std::vector<double> e = soc_trajectory(spec, sched, delta_t);
    for (int t = 1; t < static_cast<int>(e.size()); ++t) {
        if (e[t] < spec.e_min - 1e-9)
            chk.violations.push_back({LimitViolation::Kind::soc_low, t - 1, e[t], spec.e_min});
        if (e[t] > spec.e_max + 1e-9)
            chk.violations.push_back({LimitViolation::Kind::soc_high, t - 1, e[t], spec.e_max});
    }
    chk.ok = chk.violations.empty();
    return chk;
}

void save_schedule(std::ostream& out, const EssSchedule& sched) {
    out << "hour,p_plus_kw_per_phase,p_minus_kw_per_phase\n";
    char buf[96];
    for (int t = 0; t < sched.n_hours(); ++t) {
        std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g\n", t, sched.p_plus[t], sched.p_minus[t]);
        out << buf;
    }
}

EssSchedule load_schedule(std::istream& in) {
    EssSchedule sched;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("schedule CSV is empty");
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        int hour;
        double pp, pm;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf", &hour, &pp, &pm) != 3)
            throw ParseError(line_no, "malformed schedule record");
        if (hour != sched.n_hours()) throw ParseError(line_no, "schedule hours must be consecutive from 0");
        sched.p_plus.push_back(pp);
        sched.p_minus.push_back(pm);
    }
    return sched;
}

}  // namespace gridstor
