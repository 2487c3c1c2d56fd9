#pragma once

// Closed-form single-slot model of multichannel slotted ALOHA random access,
// with and without binary countdown contention resolution (BCCR) on MSG3.

#include <cstdint>
#include <optional>

namespace rach {

/// Contention state of one PRACH slot: `contenders` non-barred UEs choosing
/// uniformly among `preambles` orthogonal preambles.
struct SlotLoad {
    std::int64_t contenders = 0;
    std::int64_t preambles = 1;

    void validate() const;
};

/// BCCR dimensioning: `levels` priority levels resolved in
/// ceil(log2(levels)) contention resolution micro-slots, each costing
/// `slot_resources` resource blocks per MSG3 opportunity.
struct BccrConfig {
    int levels = 1;
    double slot_resources = 0.0;

    static BccrConfig with_slots(int slots, double slot_resources);

    int slots() const;
    void validate() const;
};

/// Uplink resource blocks spent per PRACH cycle.
struct ResourceModel {
    double msg1_total = 6.0;  // all MSG1 transmissions (the PRACH itself)
    double msg3 = 2.0;        // one MSG3

    void validate() const;
};

struct AnalyticBreakdown {
    double expected_success = 0.0;
    double expected_idle = 0.0;
    double expected_collided = 0.0;
    std::optional<double> collision_size;
    double cr_probability = 0.0;
    double expected_success_bccr = 0.0;
    double resources_base = 0.0;
    double resources_bccr = 0.0;
    double throughput_base = 0.0;
    double throughput_bccr = 0.0;
    std::optional<double> gain;  // empty when the baseline throughput is zero
};

namespace analytics {

/// (1 - 1/M)^n; switches to exp(n log1p(-1/M)) for large n.
double idle_probability_power(std::int64_t n, std::int64_t preambles);

/// Expected number of UEs alone on their preamble: n (1 - 1/M)^(n-1).
double expected_success(const SlotLoad& load);

/// Expected number of preambles nobody picked: M (1 - 1/M)^n.
double expected_idle_preambles(const SlotLoad& load);

/// M - E[successes] - E[idle].
double expected_collided_preambles(const SlotLoad& load);

/// Expected number of UEs on a collided preamble, or nullopt when no
/// collision is expected (n < 2).
std::optional<double> expected_collision_size(const SlotLoad& load);

/// Probability that the highest priority among `collision_size` UEs drawing
/// uniformly from `levels` levels is held by exactly one UE. Non-integral
/// sizes are evaluated as real powers. Throws std::domain_error when
/// collision_size < 1.
double contention_resolution_probability(double collision_size, int levels);

/// Expected successes per slot when collided preambles are resolved by BCCR.
double expected_success_bccr(const SlotLoad& load, const BccrConfig& cfg);

/// Expected number of activated (non-idle) preambles.
double expected_activated_preambles(const SlotLoad& load);

/// Successes per resource block. With no BCCR config this is the baseline;
/// otherwise every activated preamble additionally pays k * r for the
/// contention resolution period.
double effective_throughput(const SlotLoad& load, const std::optional<BccrConfig>& cfg,
                            const ResourceModel& resources);

/// T'/T. Throws std::domain_error when the baseline throughput is zero.
double throughput_gain(const SlotLoad& load, const BccrConfig& cfg, const ResourceModel& resources);

AnalyticBreakdown breakdown(const SlotLoad& load, const BccrConfig& cfg, const ResourceModel& resources);

}  // namespace analytics
}  // namespace rach
