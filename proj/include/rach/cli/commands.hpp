#pragma once

// The five harness commands. Each has a compute step returning plain rows
// (used directly by the tests) and a cmd_* wrapper that writes CSV files
// with a metadata header into an output directory and returns an exit code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rach/cli/config.hpp"
#include "rach/sim.hpp"

namespace rach::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidationFailed = 1;
inline constexpr int kExitConfigError = 2;

std::string tool_version();

// ---- analyze

struct AnalyzeRow {
    std::int64_t n = 0;
    std::int64_t preambles = 0;
    int slots = 0;
    double r_over_r3 = 0.0;
    double success_ratio_base = 0.0;
    double success_ratio_bccr = 0.0;
    std::optional<double> gain;
};

std::vector<AnalyzeRow> analyze_grid(const ScenarioFile& cfg);

// ---- validate

struct ValidateRow {
    std::int64_t n = 0;
    std::int64_t preambles = 0;
    int slots = 0;
    double closed_form = 0.0;  // expected successes
    double oracle = 0.0;
    double oracle_std_error = 0.0;  // 0 for exact oracle values
    double abs_error_ratio = 0.0;   // |closed_form - oracle| / n
    double tolerance = 0.0;
    bool pass = false;
};

/// Closed form against the oracle on the validate grid. Points with
/// contention resolution use the Monte Carlo oracle; points without it use
/// exact enumeration per preamble and a 1e-9 tolerance.
std::vector<ValidateRow> validate_grid(const ScenarioFile& cfg);

// ---- simulate

struct ReplicationResult {
    std::uint64_t seed = 0;
    sim::RunMetrics metrics;
};

struct PointResult {
    SweepPoint point;
    std::vector<ReplicationResult> replications;
};

/// Seeds of the replications, shared by every sweep point.
std::vector<std::uint64_t> replication_seeds(const ScenarioFile& cfg);

std::vector<PointResult> simulate_sweep(const ScenarioFile& cfg);

struct SimulateRow {
    SweepPoint point;
    std::string class_name;  // "all" for the whole population
    int replications = 0;
    double mean_service_time_s = 0.0;
    double ci95_halfwidth = 0.0;  // of the mean service time
    double median_service_time_s = 0.0;
    double p99_service_time_s = 0.0;
    double p99_ci95_halfwidth = 0.0;
    std::optional<double> effective_throughput;  // whole-population rows only
    std::optional<double> throughput_ci95_halfwidth;
    std::optional<double> success_ratio;
    double completion_fraction = 0.0;
};

/// One "all" row per point, followed by one row per class when there are
/// several. Metrics are means over replications; CIs are Student-t.
std::vector<SimulateRow> aggregate(const ScenarioFile& cfg, const std::vector<PointResult>& results);

// ---- prioritize

struct SchemeClassRow {
    std::string scheme;  // "bccr" or "acb"
    std::string class_name;
    double barring_probability = 0.0;
    double mean_service_time_s = 0.0;
    double ci95_halfwidth = 0.0;
    double p99_service_time_s = 0.0;  // pooled over replications
};

struct PrioritizeResult {
    std::int64_t devices = 0;
    std::vector<SchemeClassRow> rows;
    double target_p99_s = 0.0;
    double matched_p99_s = 0.0;
    double match_error = 0.0;  // |acb - bccr| / bccr on the prioritized class
    int iterations = 0;
    bool converged = false;
    double delay_ratio = 0.0;  // ACB over BCCR mean service time of the other class
};

/// BCCR with class bands and common static barring, then ACB with the
/// other class's barring probability bisected until the prioritized class's
/// 99th percentile matches. Class 0 is the prioritized class.
std::vector<PrioritizeResult> prioritize(const ScenarioFile& cfg, std::ostream* progress = nullptr);

// ---- timing

struct TimingRow {
    double transmit_ratio = 0.0;
    double crs_duration_s = 0.0;
    double transmit_duration_s = 0.0;
    double max_hearing_distance_m = 0.0;
};

std::vector<TimingRow> timing_table(const ScenarioFile& cfg);

// ---- command wrappers

int cmd_analyze(const ScenarioFile& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_validate(const ScenarioFile& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_simulate(const ScenarioFile& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_prioritize(const ScenarioFile& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_timing(const ScenarioFile& cfg, const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace rach::cli
