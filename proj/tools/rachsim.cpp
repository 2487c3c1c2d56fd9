// rachsim: command-line front end for the random access simulator.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "rach/cli/commands.hpp"

namespace {

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> replications;
    std::optional<unsigned> workers;
    bool trace = false;
};

void add_common(CLI::App* cmd, Options& opt) {
    cmd->add_option("--config", opt.config, "Scenario file (YAML), or a CSV written by an earlier run");
    cmd->add_option("--out", opt.out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", opt.seed, "Base seed (overrides the file)");
    cmd->add_option("--replications", opt.replications, "Replications per sweep point (overrides the file)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--workers", opt.workers, "Worker threads (overrides the file)")->check(CLI::PositiveNumber);
    cmd->add_flag("--trace", opt.trace, "Write the per-slot trace (simulate)");
}

// Defaults, then the file, then command-line flags.
rach::cli::ScenarioFile resolve(const Options& opt) {
    auto cfg = opt.config.empty() ? rach::cli::parse_config("") : rach::cli::load_config(opt.config);
    if (opt.seed) {
        cfg.seed = *opt.seed;
    }
    if (opt.replications) {
        cfg.replications = *opt.replications;
    }
    if (opt.workers) {
        cfg.workers = *opt.workers;
    }
    if (opt.trace) {
        cfg.output.trace = true;
    }
    cfg.check();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LTE random access simulator with binary countdown contention resolution"};
    app.set_version_flag("--version", "rachsim " + rach::cli::tool_version());
    app.require_subcommand(1);

    Options opt;
    using Command = int (*)(const rach::cli::ScenarioFile&, const std::filesystem::path&, std::ostream&);
    Command command = nullptr;
    const std::pair<const char*, std::pair<const char*, Command>> commands[] = {
        {"analyze", {"Closed-form success ratio and throughput gain curves", rach::cli::cmd_analyze}},
        {"simulate", {"Run the slot simulator over the sweep", rach::cli::cmd_simulate}},
        {"validate", {"Check the closed form against the Monte Carlo oracle", rach::cli::cmd_validate}},
        {"prioritize", {"Two-class BCCR against ACB with matched 99th percentile", rach::cli::cmd_prioritize}},
        {"timing", {"Micro-slot hearing distance table", rach::cli::cmd_timing}},
    };
    for (const auto& [name, entry] : commands) {
        auto* sub = app.add_subcommand(name, entry.first);
        add_common(sub, opt);
        sub->callback([&command, fn = entry.second] { command = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : rach::cli::kExitConfigError;
    }

    try {
        const auto cfg = resolve(opt);
        return command(cfg, opt.out, std::cout);
    } catch (const rach::cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return rach::cli::kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return rach::cli::kExitValidationFailed;
    }
}
