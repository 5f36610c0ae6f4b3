#include "dastm/cli/commands.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Vehicle detection, tracking and characterization from DAS strain records"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "dastm 0.1");

    dastm::cli::CommandOptions options;
    std::uint64_t seed = 0;
    std::string config, out = "out";
    const std::map<std::string, std::string> help{
        {"simulate", "synthesize a DAS record, ground truth and a calibration driving test"},
        {"calibrate", "locate channels on the road and estimate transmissibility from driving-test runs"},
        {"detect", "per-channel vehicle arrival detection"},
        {"track", "multi-channel Kalman tracking of detections"},
        {"characterize", "wheelbase and weight per track"},
        {"eval", "run the synthetic evaluation scenarios and write metrics.csv"}};
    for (const auto& name : dastm::cli::command_names()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "random seed (overrides the config)");
        sub->add_option("--out", out, "output directory, also the default input location")->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto* sub = app.get_subcommands().front();
    if (!config.empty()) options.config = config;
    if (sub->count("--seed") > 0) options.seed = seed;
    options.out = out;
    try {
        for (const auto& path : dastm::cli::run_command(sub->get_name(), options)) {
            std::cout << path.string() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "dastm " << sub->get_name() << ": " << e.what() << '\n';
        return dastm::cli::exit_code_for(std::current_exception());
    }
    return 0;
}
