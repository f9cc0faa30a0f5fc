#include "gridstor/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace gridstor {

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key))
            throw ValidationError("config: unknown key '" + key + "' in " + where);
    }
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

ScenarioConfig load_config(const std::string& path) {
    json root;
    try {
        root = json::parse(slurp(path));
    } catch (const json::exception& e) {
        throw ValidationError("config parse error: " + std::string(e.what()));
    }
    reject_unknown_keys(root,
                        {"feeder", "profiles", "grid", "candidates", "n_ess", "n_sweep",
                         "aggregate_cap_kwh", "aggregate_from_cess", "capacity_bound_kwh", "ess",
                         "use_rate_link", "rate_link_hours", "solver", "hosting",
                         "vuf_reference_percent", "out_dir"},
                        "top level");
    ScenarioConfig cfg;
    try {
        cfg.feeder_path = root.at("feeder").get<std::string>();

        if (root.contains("profiles")) {
            const json& p = root["profiles"];
            reject_unknown_keys(p, {"mode", "path", "seed", "pv_rating_kw", "power_factor",
                                    "load_jitter", "seasons"},
                                "profiles");
            const std::string mode = p.value("mode", "synth");
            if (mode == "csv") {
                cfg.profiles_path = p.at("path").get<std::string>();
            } else if (mode == "synth") {
                cfg.seed = p.value("seed", std::uint64_t{1});
                cfg.synth = default_synth_params(p.value("pv_rating_kw", 1.0));
                cfg.synth.power_factor = p.value("power_factor", 0.95);
                cfg.synth.load_jitter = p.value("load_jitter", 0.25);
                if (p.contains("seasons")) {
                    cfg.synth.seasons.clear();
                    for (const json& s : p["seasons"]) {
                        reject_unknown_keys(s,
                                            {"season", "peak_load_kw", "base_load_kw", "pv_rating_kw",
                                             "daylight_start", "daylight_end"},
                                            "profiles.seasons");
                        SeasonShape shape;
                        shape.season = s.at("season").get<std::string>();
                        shape.peak_load_kw = s.at("peak_load_kw").get<double>();
                        shape.base_load_kw = s.at("base_load_kw").get<double>();
                        shape.pv_rating_kw = s.at("pv_rating_kw").get<double>();
                        shape.daylight_start = s.at("daylight_start").get<int>();
                        shape.daylight_end = s.at("daylight_end").get<int>();
                        cfg.synth.seasons.push_back(shape);
                    }
                }
            } else {
                throw ValidationError("config: profiles.mode must be 'csv' or 'synth'");
            }
        } else {
            cfg.synth = default_synth_params();
        }

        if (root.contains("grid")) {
            const json& g = root["grid"];
            reject_unknown_keys(g, {"hours_per_day", "delta_t", "days"}, "grid");
            cfg.grid.hours_per_day = g.value("hours_per_day", 24);
            cfg.grid.delta_t = g.value("delta_t", 1.0);
            if (g.contains("days")) {
                for (const json& d : g["days"]) {
                    reject_unknown_keys(d, {"id", "season", "weight"}, "grid.days");
                    cfg.grid.days.push_back(
                        {d.at("id").get<int>(), d.at("season").get<std::string>(), d.at("weight").get<double>()});
                }
            } else {
                cfg.grid.days = default_time_grid().days;
            }
        } else {
            cfg.grid = default_time_grid();
        }

        if (root.contains("candidates")) cfg.candidates = root["candidates"].get<std::vector<int>>();
        if (root.contains("n_ess")) {
            if (root["n_ess"].is_string()) {
                if (root["n_ess"].get<std::string>() != "free")
                    throw ValidationError("config: n_ess must be an integer or \"free\"");
                cfg.n_ess = kFreeCount;
            } else {
                cfg.n_ess = root["n_ess"].get<int>();
            }
        }
        if (root.contains("n_sweep")) {
            cfg.n_sweep = root["n_sweep"].get<std::vector<int>>();
            for (int n : cfg.n_sweep)
                if (n < 1) throw ValidationError("config: n_sweep entries must be >= 1");
        }
        if (root.contains("aggregate_cap_kwh")) {
            cfg.aggregate_cap_kwh = root["aggregate_cap_kwh"].get<double>();
            cfg.aggregate_from_cess = false;
        }
        if (root.contains("aggregate_from_cess")) cfg.aggregate_from_cess = root["aggregate_from_cess"].get<bool>();
        cfg.capacity_bound_kwh = root.value("capacity_bound_kwh", 100.0);

        if (root.contains("ess")) {
            const json& e = root["ess"];
            reject_unknown_keys(e, {"eta_plus", "eta_minus", "e_min", "p_max_charge", "p_max_discharge"},
                                "ess");
            cfg.ess_defaults.eta_plus = e.value("eta_plus", 1.0);
            cfg.ess_defaults.eta_minus = e.value("eta_minus", 1.0);
            cfg.ess_defaults.e_min = e.value("e_min", 0.0);
            cfg.ess_defaults.p_max_charge = e.value("p_max_charge", 0.0);
            cfg.ess_defaults.p_max_discharge = e.value("p_max_discharge", 0.0);
        }
        cfg.use_rate_link = root.value("use_rate_link", true);
        cfg.rate_link_hours = root.value("rate_link_hours", 2.0);

        if (root.contains("solver")) {
            const json& s = root["solver"];
            reject_unknown_keys(s, {"eps_abs", "eps_rel", "max_iter"}, "solver");
            cfg.solver.eps_abs = s.value("eps_abs", 1e-6);
            cfg.solver.eps_rel = s.value("eps_rel", 1e-6);
            cfg.solver.max_iter = s.value("max_iter", 50000);
        }
        if (root.contains("hosting")) {
            const json& h = root["hosting"];
            reject_unknown_keys(h, {"day", "tol_kw"}, "hosting");
            cfg.hosting_day = h.value("day", 0);
            cfg.hosting_tol_kw = h.value("tol_kw", 0.01);
        }
        cfg.vuf_reference_percent = root.value("vuf_reference_percent", 2.0);
        cfg.out_dir = root.value("out_dir", "out");
    } catch (const json::exception& e) {
        throw ValidationError("config: " + std::string(e.what()));
    }
    return cfg;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << content;
        if (!out.good()) throw std::runtime_error("write failed for " + tmp);
    }
    fs::rename(tmp, path);
}

namespace {

struct LoadedScenario {
    Network net;
    ProfileSet profiles;
};

LoadedScenario load_scenario(const ScenarioConfig& cfg) {
    LoadedScenario sc;
    {
        std::ifstream in(cfg.feeder_path);
        if (!in) throw ValidationError("cannot open feeder file: " + cfg.feeder_path);
        sc.net = parse_network(in);
    }
    cfg.grid.validate();
    if (!cfg.profiles_path.empty()) {
        std::ifstream in(cfg.profiles_path);
        if (!in) throw ValidationError("cannot open profile file: " + cfg.profiles_path);
        sc.profiles = load_profiles(in, sc.net, cfg.grid);
    } else {
        sc.profiles = synth_profiles(cfg.seed, sc.net, cfg.grid, cfg.synth);
    }
    return sc;
}

SizingProblem make_sizing_problem(const ScenarioConfig& cfg, const LoadedScenario& sc) {
    SizingProblem prob;
    prob.net = &sc.net;
    prob.profiles = &sc.profiles;
    prob.grid = &cfg.grid;
    prob.candidates = cfg.candidates;
    std::sort(prob.candidates.begin(), prob.candidates.end());
    prob.candidates.erase(std::unique(prob.candidates.begin(), prob.candidates.end()),
                          prob.candidates.end());
    prob.n_ess = cfg.n_ess;
    prob.aggregate_cap_kwh = cfg.aggregate_cap_kwh;
    prob.capacity_bound_kwh = cfg.capacity_bound_kwh;
    prob.ess_defaults = cfg.ess_defaults;
    prob.use_rate_link = cfg.use_rate_link;
    prob.rate_link_hours = cfg.rate_link_hours;
    prob.qp_settings = cfg.solver;
    return prob;
}

std::string soc_series_csv(const Placement& pl, const EssSpec& spec, const TimeGrid& grid, int day_id) {
    const EssSchedule& sched = pl.schedules.at(day_id);
    const std::vector<double> soc = soc_trajectory(spec, sched, grid.delta_t);
    std::ostringstream out;
    out << "hour,soc_kwh\n";
    char buf[64];
    for (size_t t = 0; t < soc.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%zu,%.10g\n", t, soc[t]);
        out << buf;
    }
    return out.str();
}

void emit_solution_files(const ScenarioConfig& cfg, const SizingSolution& sol, const std::string& prefix,
                         RunResult& result) {
    const fs::path dir(cfg.out_dir);
    write_file_atomic((dir / (prefix + "solution.txt")).string(), format_solution(sol));
    result.artifacts.push_back(prefix + "solution.txt");
    for (const Placement& pl : sol.placements) {
        const EssSpec spec = placement_spec(pl, cfg.ess_defaults, cfg.use_rate_link, cfg.rate_link_hours);
        for (const auto& [day_id, sched] : pl.schedules) {
            std::ostringstream sched_csv;
            save_schedule(sched_csv, sched);
            const std::string sched_name =
                prefix + "ess_" + std::to_string(pl.bus_id) + "_day" + std::to_string(day_id) + ".csv";
            write_file_atomic((dir / sched_name).string(), sched_csv.str());
            result.artifacts.push_back(sched_name);
            const std::string soc_name =
                prefix + "soc_" + std::to_string(pl.bus_id) + "_day" + std::to_string(day_id) + ".csv";
            write_file_atomic((dir / soc_name).string(), soc_series_csv(pl, spec, cfg.grid, day_id));
            result.artifacts.push_back(soc_name);
        }
    }
}

std::string hosting_detail_or_zero(const Network& net, const ProfileSet& profiles, const ScenarioConfig& cfg,
                                   std::span<const Placement> placements, HostingResult& hosting,
                                   bool& have_pv) {
    have_pv = false;
    for (int b = 0; b < net.n_buses() && !have_pv; ++b)
        for (int f = 0; f < kNumPhases; ++f)
            if (net.buses[b].has_pv[f]) have_pv = true;
    if (!have_pv) return "no PV systems";
    hosting = hosting_capacity(net, profiles, cfg.grid, cfg.hosting_day, placements, cfg.hosting_tol_kw);
    return "";
}

RunResult run_baseline(const ScenarioConfig& cfg, int jobs) {
    RunResult result;
    const LoadedScenario sc = load_scenario(cfg);
    const std::vector<Placement> none;

    IndexReport rep;
    const SeasonalLosses losses = annual_losses(sc.net, sc.profiles, cfg.grid, none, jobs);
    rep.annual_loss_kwh = losses.annual_kwh;
    rep.seasonal_loss_kwh = losses.per_season_kwh;
    HostingResult hosting;
    bool have_pv = false;
    hosting_detail_or_zero(sc.net, sc.profiles, cfg, none, hosting, have_pv);
    rep.hosting_kw = hosting.total_kw;
    rep.hosting_per_unit_rating_kw = hosting.per_system_kw;
    rep.hosting_binding_bus = hosting.binding_bus;
    rep.hosting_binding_hour = hosting.binding_hour;
    const VufStudy study = vuf_study(sc.net, sc.profiles, cfg.grid, none, jobs);
    rep.vuf_max_percent = study.max_percent;
    rep.vuf_max_bus = study.max_bus;
    rep.vuf_max_hour = study.max_hour;
    rep.vuf_avg_percent = study.avg_percent;
    rep.vuf_reference_percent = cfg.vuf_reference_percent;

    write_file_atomic((fs::path(cfg.out_dir) / "baseline_report.csv").string(), index_report_csv(rep));
    result.artifacts.push_back("baseline_report.csv");
    write_file_atomic((fs::path(cfg.out_dir) / "baseline_vuf_series.csv").string(),
                      vuf_series_csv(sc.net, sc.profiles, cfg.grid, none));
    result.artifacts.push_back("baseline_vuf_series.csv");
    return result;
}

RunResult run_size(const ScenarioConfig& cfg, int jobs) {
    RunResult result;
    const LoadedScenario sc = load_scenario(cfg);
    const SizingProblem prob = make_sizing_problem(cfg, sc);
    const SizingSolution sol = solve_miqp(prob);
    emit_solution_files(cfg, sol, "", result);

    const IndexReport rep =
        build_index_report(sc.net, sc.profiles, cfg.grid, sol.placements, cfg.hosting_day,
                           cfg.hosting_tol_kw, cfg.vuf_reference_percent, jobs);
    write_file_atomic((fs::path(cfg.out_dir) / "size_report.csv").string(), index_report_csv(rep));
    result.artifacts.push_back("size_report.csv");
    return result;
}

RunResult run_sweep(const ScenarioConfig& cfg, int jobs) {
    RunResult result;
    const LoadedScenario sc = load_scenario(cfg);
    SizingProblem prob = make_sizing_problem(cfg, sc);

    // Baseline indices for the improvement columns.
    const std::vector<Placement> none;
    const SeasonalLosses base_losses = annual_losses(sc.net, sc.profiles, cfg.grid, none, jobs);
    HostingResult base_hosting;
    bool have_pv = false;
    hosting_detail_or_zero(sc.net, sc.profiles, cfg, none, base_hosting, have_pv);
    const VufStudy base_vuf = vuf_study(sc.net, sc.profiles, cfg.grid, none, jobs);

    // Aggregate capacity: explicit, or taken from the single-unit optimum.
    double aggregate = 0.0;
    if (cfg.aggregate_cap_kwh) {
        aggregate = *cfg.aggregate_cap_kwh;
    } else {
        SizingProblem cess = prob;
        cess.n_ess = 1;
        cess.aggregate_cap_kwh.reset();
        const SizingSolution sol = solve_miqp(cess);
        for (const Placement& pl : sol.placements) aggregate += pl.capacity_kwh;
        if (aggregate <= 0.0)
            throw InfeasibleError("single-unit sizing found no useful capacity to distribute");
    }
    prob.aggregate_cap_kwh = aggregate;

    std::ostringstream sweep_csv, loss_csv, host_csv;
    sweep_csv << "n_ess,locations,capacities_kwh,objective_kwh,annual_loss_kwh,loss_reduction_percent,"
                 "hosting_kw,hosting_increase_percent,vuf_max_percent,vuf_avg_percent\n";
    loss_csv << "n_ess,objective_kwh,annual_loss_kwh,loss_reduction_percent\n";
    host_csv << "n_ess,hosting_kw,hosting_increase_percent\n";
    char buf[320];

    std::snprintf(buf, sizeof buf, "0,,,%.9g,%.9g,0,%.9g,0,%.9g,%.9g\n", 0.0, base_losses.annual_kwh,
                  base_hosting.total_kw, base_vuf.max_percent, base_vuf.avg_percent);
    sweep_csv << buf;
    std::snprintf(buf, sizeof buf, "0,%.9g,%.9g,0\n", 0.0, base_losses.annual_kwh);
    loss_csv << buf;
    std::snprintf(buf, sizeof buf, "0,%.9g,0\n", base_hosting.total_kw);
    host_csv << buf;

    for (int n : cfg.n_sweep) {
        SizingProblem sub = prob;
        sub.n_ess = n;
        const SizingSolution sol = solve_miqp(sub);
        emit_solution_files(cfg, sol, "n" + std::to_string(n) + "_", result);

        const SeasonalLosses losses = annual_losses(sc.net, sc.profiles, cfg.grid, sol.placements, jobs);
        HostingResult hosting;
        if (have_pv)
            hosting = hosting_capacity(sc.net, sc.profiles, cfg.grid, cfg.hosting_day, sol.placements,
                                       cfg.hosting_tol_kw);
        const VufStudy study = vuf_study(sc.net, sc.profiles, cfg.grid, sol.placements, jobs);

        std::ostringstream locs, caps;
        for (size_t i = 0; i < sol.placements.size(); ++i) {
            if (i) {
                locs << ' ';
                caps << ' ';
            }
            locs << sol.placements[i].bus_id;
            char cb[32];
            std::snprintf(cb, sizeof cb, "%.6g", sol.placements[i].capacity_kwh);
            caps << cb;
        }
        const double loss_red = base_losses.annual_kwh > 0.0
                                    ? 100.0 * (base_losses.annual_kwh - losses.annual_kwh) / base_losses.annual_kwh
                                    : 0.0;
        const double host_inc = base_hosting.total_kw > 0.0
                                    ? 100.0 * (hosting.total_kw - base_hosting.total_kw) / base_hosting.total_kw
                                    : 0.0;
        std::snprintf(buf, sizeof buf, "%d,%s,%s,%.9g,%.9g,%.6g,%.9g,%.6g,%.9g,%.9g\n", n,
                      locs.str().c_str(), caps.str().c_str(), sol.objective_kwh, losses.annual_kwh, loss_red,
                      hosting.total_kw, host_inc, study.max_percent, study.avg_percent);
        sweep_csv << buf;
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.6g\n", n, sol.objective_kwh, losses.annual_kwh,
                      loss_red);
        loss_csv << buf;
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.6g\n", n, hosting.total_kw, host_inc);
        host_csv << buf;
    }

    const fs::path dir(cfg.out_dir);
    write_file_atomic((dir / "sweep.csv").string(), sweep_csv.str());
    result.artifacts.push_back("sweep.csv");
    write_file_atomic((dir / "loss_vs_n.csv").string(), loss_csv.str());
    result.artifacts.push_back("loss_vs_n.csv");
    write_file_atomic((dir / "hosting_vs_n.csv").string(), host_csv.str());
    result.artifacts.push_back("hosting_vs_n.csv");
    return result;
}

RunResult run_report(const ScenarioConfig& cfg) {
    RunResult result;
    const fs::path dir(cfg.out_dir);
    std::ostringstream bundle;
    bundle << "source,index,value,units,detail\n";

    auto merge_report = [&](const std::string& name) {
        const fs::path p = dir / name;
        if (!fs::exists(p)) return;
        std::ifstream in(p);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (!line.empty()) bundle << name << ',' << line << '\n';
        }
    };
    merge_report("baseline_report.csv");
    merge_report("size_report.csv");

    if (fs::exists(dir / "sweep.csv")) {
        std::ifstream in(dir / "sweep.csv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            // n_ess,locations,capacities,objective,annual,red%,hosting,inc%,vufmax,vufavg
            std::vector<std::string> f;
            std::string cur;
            for (char ch : line) {
                if (ch == ',') {
                    f.push_back(cur);
                    cur.clear();
                } else {
                    cur.push_back(ch);
                }
            }
            f.push_back(cur);
            if (f.size() != 10) continue;
            bundle << "sweep.csv,sweep_n" << f[0] << "_annual_loss," << f[4] << ",kWh,\n";
            bundle << "sweep.csv,sweep_n" << f[0] << "_loss_reduction," << f[5] << ",percent,\n";
            bundle << "sweep.csv,sweep_n" << f[0] << "_hosting," << f[6] << ",kW,\n";
            bundle << "sweep.csv,sweep_n" << f[0] << "_vuf_max," << f[8] << ",percent,\n";
            bundle << "sweep.csv,sweep_n" << f[0] << "_vuf_avg," << f[9] << ",percent,\n";
        }
    }
    write_file_atomic((dir / "report_bundle.csv").string(), bundle.str());
    result.artifacts.push_back("report_bundle.csv");
    return result;
}

}  // namespace

RunResult run_command(const std::string& command, const ScenarioConfig& cfg, int jobs) {
    RunResult result;
    try {
        fs::create_directories(cfg.out_dir);
        if (command == "validate") {
            const LoadedScenario sc = load_scenario(cfg);
            const RadialReport rep = validate_radial(sc.net);
            if (!rep.ok) {
                result.exit_code = kExitConfigError;
                result.error_kind = "validation";
                result.error_message = rep.message;
            }
            return result;
        }
        if (command == "baseline") return run_baseline(cfg, jobs);
        if (command == "size") return run_size(cfg, jobs);
        if (command == "sweep") return run_sweep(cfg, jobs);
        if (command == "report") return run_report(cfg);
        result.exit_code = kExitConfigError;
        result.error_kind = "usage";
        result.error_message = "unknown command: " + command;
        return result;
    } catch (const InfeasibleError& e) {
        result.exit_code = kExitInfeasible;
        result.error_kind = "infeasible";
        result.error_message = e.what();
    } catch (const ParseError& e) {
        result.exit_code = kExitConfigError;
        result.error_kind = "parse";
        result.error_message = e.what();
    } catch (const ValidationError& e) {
        result.exit_code = kExitConfigError;
        result.error_kind = "config";
        result.error_message = e.what();
    } catch (const std::exception& e) {
        result.exit_code = kExitSolverFailure;
        result.error_kind = "solver";
        result.error_message = e.what();
    }
    return result;
}

}  // namespace gridstor
