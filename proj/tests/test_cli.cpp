#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rach/cli/commands.hpp"
#include "rach/cli/config.hpp"

using namespace rach;
using namespace rach::cli;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("rachsim_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string data_rows(const std::filesystem::path& p) {
    std::istringstream in(read_file(p));
    std::string line;
    std::string out;
    while (std::getline(in, line)) {
        if (!line.starts_with("#")) {
            out += line + '\n';
        }
    }
    return out;
}

int run_tool(const std::string& args) {
    const std::string cmd = std::string(RACHSIM_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config defaults and overrides") {
    const auto cfg = parse_config("");
    CHECK(cfg.preambles == 30);
    CHECK(cfg.replications == 10);
    CHECK(cfg.traffic.devices == 10000);
    CHECK(cfg.barring.policy == PolicyKind::Estimated);

    const auto custom = parse_config(R"(
seed: 5
traffic: {devices: 300, alpha: 2}
bccr: {slots: 2, r_over_r3: 0.5}
barring: {policy: full_state}
retry_cap: 4
sweep: {devices: [100, 200], slots: [0, 2], policy: [estimated, none]}
)");
    CHECK(custom.seed == 5);
    CHECK(custom.traffic.devices == 300);
    CHECK(custom.traffic.alpha == 2.0);
    CHECK(custom.traffic.beta == 4.0);
    CHECK(custom.retry_cap == 4);
    CHECK(custom.bccr.slots == 2);
    const auto points = sweep_points(custom);
    REQUIRE(points.size() == 8);
    CHECK(points.front().devices == 100);
    CHECK(points.front().policy == PolicyKind::Estimated);
    CHECK(points.back().devices == 200);
    CHECK(points.back().slots == 2);
    CHECK(points.back().policy == PolicyKind::None);
}

TEST_CASE("schema errors carry line numbers") {
    auto line_of = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return e.line();
        }
        return -1;
    };
    CHECK(line_of("seed: 1\ntraffic:\n  devices: 10\n  colour: red\n") == 4);
    CHECK(line_of("seed: 1\nbogus: 3\n") == 2);
    CHECK(line_of("traffic:\n  devices: lots\n") == 2);
    CHECK(line_of("barring:\n  policy: sometimes\n") == 2);
    CHECK(line_of("classes:\n  - {name: a, share: 0.5}\n  - {name: b, share: 0.5, band: [1]}\n") == 3);
    CHECK(line_of("traffic: [1, 2\n") > 0);
    CHECK(line_of("traffic:\n  devices: -5\n") == 2);

    CHECK_THROWS_AS(parse_config("classes:\n  - {name: a, share: 0.5}\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("priority: bands\nbccr: {slots: 1}\n"
                                 "classes: [{name: a, share: 0.3}, {name: b, share: 0.3}, {name: c, share: 0.4}]\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("replications: 0\n"), ConfigError);
}

TEST_CASE("resolved config round-trips through its one-line form") {
    const auto cfg = parse_config(R"(
seed: 18446744073709551615
traffic: {devices: 1234, window_s: 0.7, alpha: 2.5, beta: 3.25}
bccr: {slots: 3, r_over_r3: 0.1}
priority: bands
classes:
  - {name: first, share: 0.3, band: [0, 1]}
  - {name: second, share: 0.7, band: [2, 7]}
barring:
  policy: static
  table: [{devices: 1234, probabilities: [0.1, 0.2]}]
retry_cap: 7
sweep: {r_over_r3: [0.04, 0.1]}
)");
    const auto line = to_yaml_line(cfg);
    CHECK(line.find('\n') == std::string::npos);
    const auto again = parse_config(line);
    CHECK(to_yaml_line(again) == line);
    CHECK(again.seed == 18446744073709551615ULL);
    CHECK(again.traffic.window_s == 0.7);
    REQUIRE(again.classes.size() == 2);
    CHECK(again.classes[1].band->last == 7);
    CHECK(again.barring.table.at(0).probabilities.at(1) == 0.2);
}

TEST_CASE("scenario construction") {
    auto cfg = parse_config("priority: bands\nclasses: [{name: a, share: 0.25}, {name: b, share: 0.75}]\n");
    const auto s = build_scenario(cfg, {500, 2, 0.5, PolicyKind::Static}, 3);
    REQUIRE(s.bccr);
    CHECK(s.bccr->levels == 4);
    CHECK(s.bccr->slot_resources == doctest::Approx(1.0));
    const auto& band = std::get<bccr::ClassBand>(s.priority);
    CHECK(band.bands.at(class_id(0)).first == 0);
    CHECK(band.bands.at(class_id(0)).last == 1);
    CHECK(band.bands.at(class_id(1)).last == 3);
    // Static default schedule at N = 500 is fully open.
    CHECK(std::get<barring::StaticPolicy>(s.barring).per_class.at(0) == 0.0);

    const auto none = build_scenario(cfg, {500, 0, 0.5, PolicyKind::None}, 3);
    CHECK_FALSE(none.bccr);
    CHECK_THROWS_AS(build_scenario(cfg, {500, 17, 0.5, PolicyKind::None}, 3), ConfigError);
}

TEST_CASE("analyze grid") {
    auto cfg = parse_config("analyze: {slots: [0, 1], r_over_r3: [0.04]}\n");
    const auto rows = analyze_grid(cfg);
    CHECK(rows.size() == 2 * 194);
    for (const auto& r : rows) {
        if (r.slots == 0) {
            REQUIRE(r.gain);
            REQUIRE(*r.gain == doctest::Approx(1.0));
        }
        if (r.slots == 1 && r.n == 50) {
            CHECK(r.success_ratio_base == doctest::Approx(0.19).epsilon(0.03));
            CHECK(r.success_ratio_bccr >= 0.31);
            CHECK(r.success_ratio_bccr <= 0.32);
            CHECK(std::abs(*r.gain - 1.60) <= 0.01);
        }
    }
}

TEST_CASE("validate grid") {
    auto cfg = parse_config("validate: {n_min: 2, n_max: 60, n_step: 29, slots: [0, 2], trials: 20000}\n");
    const auto rows = validate_grid(cfg);
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) {
        CAPTURE(r.n);
        CAPTURE(r.slots);
        CHECK(r.pass);
        if (r.slots == 0) {
            CHECK(std::abs(r.closed_form - r.oracle) <= 1e-9);
        }
    }

    auto pair = parse_config("preambles: 1\nvalidate: {n_min: 2, n_max: 2, slots: [1], trials: 100000}\n");
    const auto one = validate_grid(pair);
    REQUIRE(one.size() == 1);
    CHECK(one[0].closed_form == doctest::Approx(0.5));
    CHECK(std::abs(one[0].oracle - 0.5) <= 0.01);

    auto strict = parse_config("validate: {n_min: 100, n_max: 100, slots: [4], trials: 2000, tolerance: 1e-7}\n");
    const auto dir = scratch("validate");
    std::ostringstream log;
    CHECK(cmd_validate(strict, dir, log) == kExitValidationFailed);
    CHECK(read_file(dir / "validate.csv").find(",fail\n") != std::string::npos);
}

TEST_CASE("simulate with one device") {
    auto cfg = parse_config("replications: 3\ntraffic: {devices: 1}\n");
    const auto rows = aggregate(cfg, simulate_sweep(cfg));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean_service_time_s == rows[0].p99_service_time_s);
    CHECK(rows[0].success_ratio == 1.0);
}

TEST_CASE("per-class rows and worker independence") {
    const std::string text = R"(
replications: 4
traffic: {devices: 1500}
bccr: {slots: 2}
priority: bands
classes: [{name: hi, share: 0.2}, {name: lo, share: 0.8}]
sweep: {slots: [0, 2]}
)";
    auto cfg = parse_config(text);
    const auto rows = aggregate(cfg, simulate_sweep(cfg));
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].class_name == "all");
    CHECK(rows[1].class_name == "hi");
    CHECK(rows[2].class_name == "lo");
    CHECK_FALSE(rows[1].effective_throughput);
    // With bands the prioritized class is served faster.
    CHECK(rows[4].mean_service_time_s < rows[5].mean_service_time_s);

    const auto a = scratch("workers_a");
    const auto b = scratch("workers_b");
    std::ostringstream log;
    cfg.workers = 1;
    REQUIRE(cmd_simulate(cfg, a, log) == kExitOk);
    cfg.workers = 3;
    REQUIRE(cmd_simulate(cfg, b, log) == kExitOk);
    CHECK(data_rows(a / "simulate.csv") == data_rows(b / "simulate.csv"));
    CHECK(data_rows(a / "samples.csv") == data_rows(b / "samples.csv"));
}

TEST_CASE("reruns from an output file reproduce the metrics") {
    auto cfg = parse_config("replications: 2\ntraffic: {devices: 800}\nbccr: {slots: 1}\noutput: {trace: true}\n");
    const auto first = scratch("rerun_a");
    const auto second = scratch("rerun_b");
    std::ostringstream log;
    REQUIRE(cmd_simulate(cfg, first, log) == kExitOk);
    const auto reloaded = load_config(first / "simulate.csv");
    REQUIRE(cmd_simulate(reloaded, second, log) == kExitOk);
    CHECK(read_file(first / "simulate.csv") == read_file(second / "simulate.csv"));
    CHECK(read_file(first / "trace.jsonl") == read_file(second / "trace.jsonl"));

    const auto csv = read_file(first / "simulate.csv");
    CHECK(csv.starts_with("# tool: rachsim "));
    CHECK(csv.find("# seeds: base 1; replications ") != std::string::npos);
    CHECK(csv.find("\ndevices,k,r_over_r3,policy,class,replications,mean_service_time_s,ci95_halfwidth,") !=
          std::string::npos);
}

TEST_CASE("prioritization with no contention") {
    auto cfg = parse_config(R"(
replications: 3
traffic: {devices: 40, window_s: 2.0}
classes: [{name: prio, share: 0.5}, {name: other, share: 0.5}]
prioritize: {slots: 2}
)");
    const auto results = prioritize(cfg);
    REQUIRE(results.size() == 1);
    const auto& r = results[0];
    CHECK(r.converged);
    REQUIRE(r.rows.size() == 4);
    CHECK(r.rows[0].barring_probability == 0.0);
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(std::abs(r.rows[c].mean_service_time_s - r.rows[c + 2].mean_service_time_s) <= 0.01);
    }

    auto three = parse_config("classes: [{name: a, share: 0.2}, {name: b, share: 0.3}, {name: c, share: 0.5}]\n");
    CHECK_THROWS_AS(prioritize(three), ConfigError);
}

TEST_CASE("timing table") {
    auto cfg = parse_config("timing: {transmit_ratios: [0.8, 0.9, 1.0]}\n");
    const auto rows = timing_table(cfg);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].max_hearing_distance_m == doctest::Approx(2000.0).epsilon(2e-3));
    CHECK(std::abs(rows[1].max_hearing_distance_m - 1000.0) <= 2.0);
    CHECK(rows[2].max_hearing_distance_m == 0.0);
}

TEST_CASE("command-line exit codes") {
    const auto dir = scratch("tool");
    {
        std::ofstream bad(dir / "bad.yaml");
        bad << "traffic:\n  devices: 10\n  colour: red\n";
        std::ofstream ok(dir / "ok.yaml");
        ok << "replications: 2\ntraffic: {devices: 50}\n";
        std::ofstream strict(dir / "strict.yaml");
        strict << "validate: {n_min: 100, n_max: 100, slots: [4], trials: 1000, tolerance: 1e-9}\n";
    }
    const auto out = " --out " + (dir / "out").string();
    CHECK(run_tool("timing" + out) == 0);
    CHECK(run_tool("simulate --config " + (dir / "ok.yaml").string() + out + " --seed 3 --workers 2") == 0);
    CHECK(run_tool("simulate --config " + (dir / "bad.yaml").string() + out) == 2);
    CHECK(run_tool("simulate --config " + (dir / "missing.yaml").string() + out) == 2);
    CHECK(run_tool("validate --config " + (dir / "strict.yaml").string() + out) == 1);
    CHECK(run_tool("simulate --replications 0" + out) == 2);
    CHECK(run_tool("frobnicate") == 2);
}
