#pragma once

// Access class barring: static per-class barring probabilities, and dynamic
// barring that targets M contenders per slot from either the true backlog or
// an estimate of it maintained from per-slot preamble outcomes.

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "rach/bccr.hpp"
#include "rach/random.hpp"

namespace rach::barring {

/// True when the UE is not barred, i.e. with probability 1 - barring_probability.
bool pass_barring(double barring_probability, Rng& rng);

/// max(0, 1 - M / backlog): expected contenders equal M under overload.
double dynamic_barring_probability(double backlog, std::int64_t preambles);

/// Uniform back-off in [1, window] slots.
std::int64_t draw_backoff(std::int64_t window, Rng& rng);

/// Static common barring probability for a burst of `devices` spread over
/// `window_s`: clamp(1 - c0 * M * T_A / (N * t_slot), 0, 0.95).
double default_static_barring(std::int64_t devices, std::int64_t preambles, double window_s, double prach_period_s,
                              double scale = 1.0);

/// What the base station sees after a PRACH slot: preambles nobody used,
/// preambles that led to a successful MSG3, and activated preambles that did
/// not.
struct SlotObservation {
    std::int64_t idle = 0;
    std::int64_t successes = 0;
    std::int64_t collided = 0;

    std::int64_t preambles() const { return idle + successes + collided; }
};

struct EstimatorParams {
    double collision_weight = 2.39;  // UEs attributed to each failed preamble
    double success_weight = 1.0;     // UEs attributed to each successful preamble
    double gain = 1.0;               // 1 replaces the prior by the observation-implied backlog
    std::int64_t return_delay = 5;   // slots from MSG1 until a failed UE starts its back-off
    std::int64_t backoff_window = 20;

    void validate() const;
};

/// Backlog tracker. `ready` estimates the UEs eligible to contend in the
/// coming slot; `returning[i]` the UEs expected back from back-off i + 1
/// slots after it. `pass_probability` is the 1 - P_b that was announced for
/// the slot the next observation describes.
struct BacklogEstimator {
    double ready = 0.0;
    double pass_probability = 1.0;
    std::vector<double> returning;

    double backlog() const;
};

/// One update step. A pure function of its arguments; throws
/// std::invalid_argument if the observation does not cover `preambles`
/// preambles or has negative counts.
BacklogEstimator update_estimate(const BacklogEstimator& est, const EstimatorParams& params,
                                 const SlotObservation& observation, std::int64_t preambles,
                                 double arrivals_estimate);

struct StaticPolicy {
    std::vector<double> per_class;  // barring probability by class index
};
struct FullStatePolicy {};
struct EstimatedPolicy {
    EstimatorParams params;
};

using BarringPolicy = std::variant<StaticPolicy, FullStatePolicy, EstimatedPolicy>;

void validate(const BarringPolicy& policy);

/// Per-slot barring state for one simulation timeline.
class BarringController {
public:
    BarringController(BarringPolicy policy, std::int64_t preambles, double initial_arrivals = 0.0);

    /// Fixes the barring probabilities for the coming slot. `ready_backlog` is
    /// the true number of eligible UEs, consulted only by the full-state policy.
    void begin_slot(std::int64_t ready_backlog);

    double barring_probability(ClassId cls) const;

    /// Feeds the outcome of the slot just contended, plus the arrivals the
    /// traffic model predicts for the next one.
    void end_slot(const SlotObservation& observation, double next_arrivals_estimate);

    const BarringPolicy& policy() const { return policy_; }
    std::optional<BacklogEstimator> estimator() const;

private:
    BarringPolicy policy_;
    std::int64_t preambles_;
    double common_probability_ = 0.0;
    BacklogEstimator estimator_;
};

}  // namespace rach::barring
