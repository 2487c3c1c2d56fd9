#pragma once

// Slot-by-slot simulation of the LTE four-step random access procedure with
// optional BCCR before MSG3. The timeline is a sequence of PRACH slots; MSG3
// and MSG4 happen a configurable number of slots after MSG1, and MSG2 is
// always delivered.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rach/analytics.hpp"
#include "rach/barring.hpp"
#include "rach/bccr.hpp"
#include "rach/random.hpp"
#include "rach/traffic.hpp"

namespace rach::sim {

struct TrafficClassSpec {
    std::string name = "all";
    double share = 1.0;
};

struct Scenario {
    traffic::TrafficModel traffic;
    std::int64_t preambles = 30;
    std::optional<BccrConfig> bccr;
    barring::BarringPolicy barring = barring::EstimatedPolicy{};
    bccr::PriorityPolicy priority = bccr::UniformRandom{1};
    std::vector<TrafficClassSpec> classes{TrafficClassSpec{}};
    ResourceModel resources;
    double prach_period_s = 0.005;
    std::int64_t msg3_delay_slots = 3;  // MSG1 -> MSG3 (the CR period sits right before MSG3)
    std::int64_t msg4_delay_slots = 2;  // MSG3 -> MSG4 or its timeout
    std::int64_t backoff_window = 20;
    std::optional<std::int64_t> retry_cap;  // failed attempts before a UE gives up
    std::uint64_t seed = 1;
    std::int64_t horizon_slots = 1'000'000;
    bool record_trace = true;

    void validate() const;
    int priority_levels() const { return bccr ? bccr->levels : 1; }
};

enum class Phase : std::uint8_t { Dormant, Backlogged, AwaitingMsg3, BackingOff, Connected, Dropped };

struct UeState {
    std::uint32_t id = 0;
    ClassId cls{};
    double activation_time = 0.0;
    std::int64_t activation_slot = 0;
    Phase phase = Phase::Dormant;
    std::int64_t backoff_until = -1;
    int attempts = 0;  // failed attempts so far
    std::optional<int> priority;
};

/// One MSG1 transmission within a slot.
struct Attempt {
    std::uint32_t ue = 0;
    std::int64_t preamble = 0;
    int priority = 0;
};

enum class AttemptResult : std::uint8_t {
    Success,
    CrLoss,     // dropped out during the micro-slots, backs off before MSG3
    Collision,  // sent a colliding MSG3 and waits for the MSG4 timeout
};

struct SlotResolution {
    std::vector<AttemptResult> results;  // parallel to the attempts
    std::int64_t activated = 0;
    std::int64_t successes = 0;
    std::int64_t failed_preambles = 0;  // activated preambles without a successful MSG3
};

/// Resolves one slot's attempts: singletons succeed; shared preambles go
/// through the micro-slot countdown when BCCR is enabled and collide
/// otherwise.
SlotResolution resolve_slot(std::span<const Attempt> attempts, std::int64_t preambles,
                            const std::optional<BccrConfig>& bccr);

struct SlotRecord {
    std::int64_t slot = 0;
    std::int64_t contenders = 0;
    std::int64_t activated = 0;
    std::int64_t successes = 0;
    std::int64_t collisions = 0;  // activated preambles without a successful MSG3
    std::int64_t cr_losers = 0;
    double barring_probability = 0.0;  // of class 0
};

struct BackoffStart {
    std::uint32_t ue = 0;
    AttemptResult cause = AttemptResult::Collision;
    std::int64_t start_slot = 0;
    std::int64_t return_slot = 0;  // -1 if the UE was dropped
};

struct SlotEvents {
    SlotRecord record;
    std::vector<Attempt> attempts;
    std::vector<std::uint32_t> winners;
    std::vector<BackoffStart> backoffs;
};

struct ServiceSummary {
    std::size_t count = 0;
    double mean_s = 0.0;
    double median_s = 0.0;
    double p99_s = 0.0;
};

ServiceSummary summarize(std::span<const double> service_times);

struct RunMetrics {
    double mean_service_time_s = 0.0;
    double median_service_time_s = 0.0;
    double p99_service_time_s = 0.0;
    std::vector<double> service_time_samples;  // completion order
    std::vector<ClassId> sample_classes;       // parallel to the samples
    std::vector<ServiceSummary> per_class;     // indexed by class
    double effective_throughput = 0.0;         // successes per resource block
    double resources_used = 0.0;
    std::int64_t successes = 0;
    std::int64_t attempts = 0;
    std::int64_t connected = 0;
    std::int64_t dropped = 0;
    std::int64_t slots = 0;
    double completion_fraction = 1.0;
    std::vector<SlotRecord> trace;

    double success_ratio() const {
        return attempts == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(attempts);
    }
};

class Simulator {
public:
    explicit Simulator(Scenario scenario);

    bool finished() const;
    std::int64_t current_slot() const { return slot_; }

    /// Advances one PRACH slot. Throws std::runtime_error past the horizon.
    SlotEvents step_slot();

    RunMetrics metrics() const;

    const std::vector<UeState>& ues() const { return ues_; }
    const Scenario& scenario() const { return scenario_; }

private:
    enum class EventKind : std::uint8_t { StartBackoff, Return, Connect, Drop };
    struct Event {
        std::uint32_t ue;
        EventKind kind;
    };

    void schedule(std::int64_t slot, std::uint32_t ue, EventKind kind);
    void process_events();
    void fail(std::uint32_t ue, AttemptResult cause, std::int64_t start_slot, SlotEvents& events);
    double expected_arrivals(std::int64_t slot) const;

    Scenario scenario_;
    std::vector<UeState> ues_;
    std::vector<std::uint32_t> activation_order_;
    std::size_t next_activation_ = 0;
    std::vector<std::vector<std::uint32_t>> ready_;  // by class
    std::map<std::int64_t, std::vector<Event>> calendar_;
    barring::BarringController barring_;

    Rng barring_rng_;
    Rng preamble_rng_;
    Rng priority_rng_;
    Rng backoff_rng_;

    std::int64_t slot_ = 0;
    std::int64_t first_slot_ = 0;
    std::int64_t last_msg1_slot_ = -1;
    double preamble_resources_ = 0.0;
    std::int64_t successes_ = 0;
    std::int64_t attempts_ = 0;
    std::int64_t connected_ = 0;
    std::int64_t dropped_ = 0;
    std::vector<double> samples_;
    std::vector<ClassId> sample_classes_;
    std::vector<SlotRecord> trace_;
};

/// Runs a scenario to completion. Deterministic for a fixed seed.
RunMetrics run(const Scenario& scenario);

}  // namespace rach::sim
