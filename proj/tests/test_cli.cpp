#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridstor/scenario.hpp"
#include "support.hpp"

using namespace gridstor;
using namespace gridstor::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("gridstor_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static inline int counter = 0;
};

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kChainFeeder = R"([BUS]
1 ABC - - 0
2 ABC ABC ABC 1
3 ABC ABC ABC 1
[LINE]
1 2 0.1 0.1 0.1 0.08 0.08 0.08
2 3 0.1 0.1 0.1 0.08 0.08 0.08
[SOURCE]
1 230 207 253 230
)";

std::string chain_config(const fs::path& dir, const std::string& extra = "") {
    std::ostringstream cfg;
    cfg << R"({
  "feeder": ")" << (dir / "feeder.txt").string() << R"(",
  "profiles": {"mode": "synth", "seed": 42, "pv_rating_kw": 2.5},
  "grid": {"hours_per_day": 24, "delta_t": 1.0, "days": [{"id": 0, "season": "summer", "weight": 365.0}]},
  "candidates": [2, 3],
  "n_ess": 1,
  "n_sweep": [1, 2],
  "capacity_bound_kwh": 40.0,
  "out_dir": ")" << (dir / "out").string() << "\"" << extra << R"(
})";
    return cfg.str();
}

}  // namespace

TEST_CASE("config loads with expected fields") {
    TempDir dir;
    write(dir.path / "feeder.txt", kChainFeeder);
    write(dir.path / "config.json", chain_config(dir.path));
    const ScenarioConfig cfg = load_config((dir.path / "config.json").string());
    CHECK(cfg.seed == 42);
    CHECK(cfg.candidates == std::vector<int>{2, 3});
    CHECK(cfg.n_ess == 1);
    CHECK(cfg.n_sweep == std::vector<int>{1, 2});
    CHECK(cfg.capacity_bound_kwh == 40.0);
    CHECK(cfg.grid.n_days() == 1);
}

TEST_CASE("unknown config keys are rejected") {
    TempDir dir;
    write(dir.path / "config.json", R"({"feeder": "x", "typo_key": 1})");
    CHECK_THROWS_WITH_AS(load_config((dir.path / "config.json").string()), doctest::Contains("typo_key"),
                         ValidationError);
}

TEST_CASE("n_ess accepts the free marker") {
    TempDir dir;
    write(dir.path / "config.json", R"({"feeder": "x", "n_ess": "free"})");
    CHECK(load_config((dir.path / "config.json").string()).n_ess == kFreeCount);
}

TEST_CASE("validate succeeds on the chain fixture") {
    TempDir dir;
    write(dir.path / "feeder.txt", kChainFeeder);
    write(dir.path / "config.json", chain_config(dir.path));
    const ScenarioConfig cfg = load_config((dir.path / "config.json").string());
    const RunResult res = run_command("validate", cfg);
    CHECK(res.exit_code == kExitOk);
}

TEST_CASE("validate reports config errors on broken feeders") {
    TempDir dir;
    write(dir.path / "feeder.txt", "[BUS]\n1 ABC - - 0\n[LINE]\n1 9 1 1 1 1 1 1\n[SOURCE]\n1 230 207 253 230\n");
    write(dir.path / "config.json", chain_config(dir.path));
    const ScenarioConfig cfg = load_config((dir.path / "config.json").string());
    const RunResult res = run_command("validate", cfg);
    CHECK(res.exit_code == kExitConfigError);
    CHECK_FALSE(res.error_message.empty());
}

TEST_CASE("unknown commands exit with a usage error") {
    TempDir dir;
    write(dir.path / "feeder.txt", kChainFeeder);
    write(dir.path / "config.json", chain_config(dir.path));
    const ScenarioConfig cfg = load_config((dir.path / "config.json").string());
    CHECK(run_command("frobnicate", cfg).exit_code == kExitConfigError);
}

TEST_CASE("baseline on a dead feeder writes an all-zero report") {
    TempDir dir;
    write(dir.path / "feeder.txt", R"([BUS]
1 ABC - - 0
2 ABC - - 0
[LINE]
1 2 0.1 0.1 0.1 0.08 0.08 0.08
[SOURCE]
1 230 207 253 230
)");
    write(dir.path / "config.json", chain_config(dir.path));
    const ScenarioConfig cfg = load_config((dir.path / "config.json").string());
    const RunResult res = run_command("baseline", cfg);
    REQUIRE(res.exit_code == kExitOk);
    const std::string report = read(fs::path(cfg.out_dir) / "baseline_report.csv");
    CHECK(report.find("annual_loss,0,kWh") != std::string::npos);
    CHECK(report.find("hosting_total,0,kW") != std::string::npos);
    // the unbalance factor is numerically zero, not necessarily the glyph "0"
    const auto pos = report.find("vuf_max,");
    REQUIRE(pos != std::string::npos);
    CHECK(std::abs(std::stod(report.substr(pos + 8))) < 1e-10);
}

TEST_CASE("baseline report carries headers with units") {
    TempDir dir;
    write(dir.path / "feeder.txt", kChainFeeder);
    write(dir.path / "config.json", chain_config(dir.path));
    const ScenarioConfig cfg = load_config((dir.path / "config.json").string());
    const RunResult res = run_command("baseline", cfg);
    REQUIRE(res.exit_code == kExitOk);
    const std::string report = read(fs::path(cfg.out_dir) / "baseline_report.csv");
    CHECK(report.rfind("index,value,units,detail\n", 0) == 0);
    const std::string series = read(fs::path(cfg.out_dir) / "baseline_vuf_series.csv");
    CHECK(series.rfind("day,hour,bus,vuf_percent\n", 0) == 0);
}

TEST_CASE("two sweeps with one seed are byte-identical") {
    TempDir dir;
    write(dir.path / "feeder.txt", kChainFeeder);
    write(dir.path / "config.json", chain_config(dir.path));
    ScenarioConfig cfg_a = load_config((dir.path / "config.json").string());
    ScenarioConfig cfg_b = cfg_a;
    cfg_a.out_dir = (dir.path / "out_a").string();
    cfg_b.out_dir = (dir.path / "out_b").string();

    const RunResult a = run_command("sweep", cfg_a);
    const RunResult b = run_command("sweep", cfg_b);
    REQUIRE(a.exit_code == kExitOk);
    REQUIRE(b.exit_code == kExitOk);
    REQUIRE(a.artifacts == b.artifacts);
    CHECK(a.artifacts.size() >= 3);
    for (const std::string& name : a.artifacts) {
        CAPTURE(name);
        CHECK(read(fs::path(cfg_a.out_dir) / name) == read(fs::path(cfg_b.out_dir) / name));
    }
}

TEST_CASE("size emits a solution with schedules, and report bundles everything") {
    TempDir dir;
    write(dir.path / "feeder.txt", kChainFeeder);
    write(dir.path / "config.json", chain_config(dir.path));
    const ScenarioConfig cfg = load_config((dir.path / "config.json").string());

    const RunResult size_res = run_command("size", cfg);
    REQUIRE(size_res.exit_code == kExitOk);
    const std::string solution = read(fs::path(cfg.out_dir) / "solution.txt");
    CHECK(solution.find("[PLACEMENT]") != std::string::npos);
    CHECK(solution.find("[STATS]") != std::string::npos);

    bool have_schedule = false;
    for (const std::string& a : size_res.artifacts)
        if (a.find("ess_") != std::string::npos) have_schedule = true;
    CHECK(have_schedule);

    const RunResult rep = run_command("report", cfg);
    REQUIRE(rep.exit_code == kExitOk);
    const std::string bundle = read(fs::path(cfg.out_dir) / "report_bundle.csv");
    CHECK(bundle.rfind("source,index,value,units,detail\n", 0) == 0);
    CHECK(bundle.find("size_report.csv,annual_loss") != std::string::npos);
}

TEST_CASE("config errors surface as exit code 2") {
    TempDir dir;
    write(dir.path / "config.json", chain_config(dir.path));  // feeder.txt missing
    const ScenarioConfig cfg = load_config((dir.path / "config.json").string());
    const RunResult res = run_command("baseline", cfg);
    CHECK(res.exit_code == kExitConfigError);
    CHECK(res.error_kind == "config");
}

TEST_CASE("unsatisfiable voltage limits surface as exit code 4") {
    TempDir dir;
    // limits so tight that load-driven drops violate them with any storage
    write(dir.path / "feeder.txt", R"([BUS]
1 ABC - - 0
2 ABC ABC - 1
3 ABC ABC - 1
[LINE]
1 2 0.1 0.1 0.1 0.08 0.08 0.08
2 3 0.1 0.1 0.1 0.08 0.08 0.08
[SOURCE]
1 230 229.99 230.05 230
)");
    write(dir.path / "config.json", chain_config(dir.path));
    const ScenarioConfig cfg = load_config((dir.path / "config.json").string());
    const RunResult res = run_command("size", cfg);
    CHECK(res.exit_code == kExitInfeasible);
    CHECK(res.error_kind == "infeasible");
}
