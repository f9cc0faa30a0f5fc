// gridstor: sizing and placement studies for storage on LV feeders.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "gridstor/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"storage sizing and placement studies on unbalanced LV feeders"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;

    const std::vector<std::string> commands = {"validate", "baseline", "size", "sweep", "report"};
    for (const std::string& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "scenario config file (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "profile generator seed (overrides config)")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--jobs", jobs, "parallel power-flow workers")->check(CLI::PositiveNumber);
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    gridstor::ScenarioConfig cfg;
    try {
        cfg = gridstor::load_config(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "{\"error\":\"config\",\"message\":\"%s\"}\n", e.what());
        return gridstor::kExitConfigError;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_set) cfg.seed = seed;

    const gridstor::RunResult result = gridstor::run_command(command, cfg, jobs);
    if (result.exit_code != gridstor::kExitOk) {
        std::fprintf(stderr, "{\"error\":\"%s\",\"message\":\"%s\"}\n", result.error_kind.c_str(),
                     result.error_message.c_str());
    } else {
        for (const std::string& artifact : result.artifacts)
            std::printf("%s/%s\n", cfg.out_dir.c_str(), artifact.c_str());
    }
    return result.exit_code;
}
