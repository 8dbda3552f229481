// delayptc: staged pipeline over file artifacts.
//
//   delayptc synth  --config cfg.json
//   delayptc all    --config cfg.json --strict
//   delayptc config              (prints the default configuration)

#include "delayptc/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("delayptc"));
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

    CLI::App app{"Passenger travel choice prediction under train delay"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool strict = false;
    bool verbose = false;
    app.add_option("--config,-c", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "override the configured seed");
    app.add_flag("--strict", strict, "fail with exit code 3 on validation problems");
    app.add_flag("--verbose,-v", verbose, "debug logging");

    for (const char* stage : delayptc::kStageNames)
        app.add_subcommand(stage, std::string(stage) == "all" ? "run ingest through eval" : std::string("run the ") + stage + " stage");
    app.add_subcommand("config", "print the effective configuration as JSON");

    CLI11_PARSE(app, argc, argv);
    if (verbose) spdlog::set_level(spdlog::level::debug);

    delayptc::PipelineConfig config;
    try {
        if (!config_path.empty()) config = delayptc::load_config(config_path, strict);
    } catch (const delayptc::Error& e) {
        spdlog::error("config: {}", e.what());
        return e.code() == "unknown-config-key" ? 3 : 1;
    }
    if (seed) config.seed = *seed;
    config.strict = config.strict || strict;

    auto* sub = app.get_subcommands().front();
    if (sub->get_name() == "config") {
        std::cout << delayptc::config_to_json(config);
        return 0;
    }
    return delayptc::run_stage_status(sub->get_name(), config);
}
