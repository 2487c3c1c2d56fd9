#pragma once

// Scenario files: a YAML document describing one experiment plus its sweep
// axes. Every key is optional; unknown keys are errors. The same struct is
// echoed into output files so a run can be repeated from its own CSV.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rach/analytics.hpp"
#include "rach/barring.hpp"
#include "rach/sim.hpp"
#include "rach/timing.hpp"
#include "rach/traffic.hpp"

namespace rach::cli {

/// Bad configuration. `line` is 1-based, or 0 when no position is known.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& message, int line = 0);
    int line() const { return line_; }

private:
    int line_;
};

enum class PolicyKind { None, Static, FullState, Estimated };

std::string to_string(PolicyKind kind);
PolicyKind parse_policy(const std::string& name);  // throws ConfigError

struct ClassEntry {
    std::string name;
    double share = 1.0;
    std::optional<bccr::PriorityRange> band;
};

/// Static barring probabilities for one burst size.
struct BarringTableRow {
    std::int64_t devices = 0;
    std::vector<double> probabilities;  // one, or one per class
};

struct BarringSection {
    PolicyKind policy = PolicyKind::Estimated;
    // Static policy: table rows win; otherwise `probabilities`; otherwise
    // the default schedule clamp(1 - scale * M * T_A / (N * t_slot), 0, 0.95).
    std::vector<double> probabilities;
    std::vector<BarringTableRow> table;
    double static_scale = 1.0;
    barring::EstimatorParams estimator;
};

struct BccrSection {
    int slots = 0;  // 0 disables contention resolution
    double r_over_r3 = 0.04;
};

struct SweepSection {
    std::vector<std::int64_t> devices;
    std::vector<int> slots;
    std::vector<double> r_over_r3;
    std::vector<PolicyKind> policies;
};

struct AnalyzeSection {
    std::int64_t n_min = 2;
    std::int64_t n_max = 195;
    std::vector<int> slots{0, 1, 2, 4};
    std::vector<double> r_over_r3{0.04, 0.5};
};

struct ValidateSection {
    std::int64_t n_min = 2;
    std::int64_t n_max = 195;
    std::int64_t n_step = 1;
    std::vector<int> slots{1, 2, 4};
    std::int64_t trials = 100000;
    double tolerance = 0.03;
};

struct PrioritizeSection {
    int slots = 4;
    double static_scale = 0.1;        // common barring of the BCCR scheme
    double acb_prio_barring = 0.0;    // P_b of the prioritized class under ACB
    double acb_max_barring = 0.9995;  // upper end of the P_b search for the other class
    double match_tolerance = 0.02;
    int max_iterations = 30;
    // Slot budget of one ACB run during the search. Light barring of a large
    // burst collapses into endless collisions; such runs are cut off here
    // and count as an unbounded 99th percentile.
    std::int64_t search_horizon_slots = 50000;
};

struct TimingSection {
    double crs_duration_s = 66.67e-6;
    double propagation_speed = 2.998e8;
    std::vector<double> transmit_ratios{0.5, 0.8, 0.9, 0.95, 1.0};
};

struct OutputSection {
    bool trace = false;
    bool samples = true;
};

struct ScenarioFile {
    std::uint64_t seed = 1;
    int replications = 10;
    unsigned workers = 1;

    traffic::TrafficModel traffic{10000, 1.0, 3.0, 4.0};
    std::int64_t preambles = 30;
    ResourceModel resources;
    BccrSection bccr;
    std::string priority = "uniform";  // or "bands"
    std::vector<ClassEntry> classes{ClassEntry{"all", 1.0, std::nullopt}};
    BarringSection barring;
    double prach_period_s = 0.005;
    std::int64_t msg3_delay_slots = 3;
    std::int64_t msg4_delay_slots = 2;
    std::int64_t backoff_window = 20;
    std::optional<std::int64_t> retry_cap;
    std::int64_t horizon_slots = 1'000'000;

    SweepSection sweep;
    AnalyzeSection analyze;
    ValidateSection validate;
    PrioritizeSection prioritize;
    TimingSection timing;
    OutputSection output;

    /// Cross-field checks that do not need a sweep point. Throws ConfigError.
    void check() const;
};

/// Parses YAML text. `source` names the input in error messages.
ScenarioFile parse_config(const std::string& text, const std::string& source = "<config>");

/// Reads a scenario file, or the `# config:` line of a CSV this tool wrote.
ScenarioFile load_config(const std::filesystem::path& path);

/// Single-line YAML flow mapping of the fully resolved configuration.
std::string to_yaml_line(const ScenarioFile& cfg);

/// One point of a simulation sweep.
struct SweepPoint {
    std::int64_t devices = 0;
    int slots = 0;
    double r_over_r3 = 0.0;
    PolicyKind policy = PolicyKind::Estimated;
};

/// Cartesian product of the sweep axes in a fixed order (devices outermost);
/// an empty axis falls back to the scenario's own value.
std::vector<SweepPoint> sweep_points(const ScenarioFile& cfg);

/// Simulator input for one point and replication seed. Throws ConfigError
/// when the point cannot be simulated (e.g. bands outside the levels).
sim::Scenario build_scenario(const ScenarioFile& cfg, const SweepPoint& point, std::uint64_t seed);

}  // namespace rach::cli
