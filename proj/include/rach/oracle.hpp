#pragma once

// Single-slot ground truth for the closed-form model, computed from the
// protocol definition only: uniform preamble choice, singletons succeed, and
// a shared preamble is rescued when its smallest priority is held by exactly
// one UE. Nothing here calls into rach::analytics.

#include <cstdint>
#include <optional>

#include "rach/analytics.hpp"
#include "rach/random.hpp"

namespace rach::oracle {

struct SlotTrialResult {
    std::int64_t idle = 0;
    std::int64_t singletons = 0;
    std::int64_t collided_preambles = 0;  // preambles chosen by two or more UEs
    std::int64_t resolved = 0;            // collided preambles with a unique top priority

    std::int64_t successes() const { return singletons + resolved; }
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t trials = 0;
};

/// How a shared preamble is decided.
enum class Rule {
    MinimumUnique,  // direct definition
    MicroSlot,      // through bccr::resolve_contention (slow cross-check)
};

SlotTrialResult mc_trial(const SlotLoad& load, const std::optional<BccrConfig>& cfg, Rng& rng,
                         Rule rule = Rule::MinimumUnique);

/// Mean successes per slot over `trials` independent trials drawn from `rng`.
McEstimate mc_slot(const SlotLoad& load, const std::optional<BccrConfig>& cfg, std::int64_t trials, Rng& rng,
                   Rule rule = Rule::MinimumUnique);

/// Same estimate, split into fixed chunks with their own sub-streams of
/// `seed` and spread over `workers` threads. The result does not depend on
/// the worker count.
McEstimate mc_slot_parallel(const SlotLoad& load, const std::optional<BccrConfig>& cfg, std::int64_t trials,
                            std::uint64_t seed, unsigned workers = 1);

/// Exact enumeration of all M^n preamble choices (times l^n priority draws
/// when cfg is set). Returns the total success count over all outcomes and
/// the number of outcomes; their ratio is the expected successes.
struct Enumeration {
    std::uint64_t total_successes = 0;
    std::uint64_t outcomes = 0;

    double expected() const { return static_cast<double>(total_successes) / static_cast<double>(outcomes); }
};

/// Throws std::invalid_argument when the outcome count exceeds 10^8.
Enumeration enumerate_slot(const SlotLoad& load, const std::optional<BccrConfig>& cfg,
                           Rule rule = Rule::MinimumUnique);

}  // namespace rach::oracle
