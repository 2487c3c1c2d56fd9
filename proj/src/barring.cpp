#include "rach/barring.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rach::barring {

bool pass_barring(double barring_probability, Rng& rng) {
    if (barring_probability <= 0.0) {
        return true;
    }
    if (barring_probability >= 1.0) {
        return false;
    }
    std::bernoulli_distribution barred(barring_probability);
    return !barred(rng);
}

double dynamic_barring_probability(double backlog, std::int64_t preambles) {
    if (preambles < 1) {
        throw std::invalid_argument("preambles must be >= 1");
    }
    if (backlog <= static_cast<double>(preambles)) {
        return 0.0;
    }
    return std::max(0.0, 1.0 - static_cast<double>(preambles) / backlog);
}

std::int64_t draw_backoff(std::int64_t window, Rng& rng) {
    if (window < 1) {
        throw std::invalid_argument("back-off window must be >= 1");
    }
    std::uniform_int_distribution<std::int64_t> dist(1, window);
    return dist(rng);
}

double default_static_barring(std::int64_t devices, std::int64_t preambles, double window_s, double prach_period_s,
                              double scale) {
    if (devices <= 0) {
        return 0.0;
    }
    const double slots_in_window = window_s / prach_period_s;
    const double p = 1.0 - scale * static_cast<double>(preambles) * slots_in_window / static_cast<double>(devices);
    return std::clamp(p, 0.0, 0.95);
}

void EstimatorParams::validate() const {
    if (!(collision_weight >= 2.0)) {
        throw std::invalid_argument("collision weight must be >= 2 (a collision involves at least two UEs)");
    }
    if (!(success_weight >= 0.0)) {
        throw std::invalid_argument("success weight must be >= 0");
    }
    if (!(gain > 0.0 && gain <= 1.0)) {
        throw std::invalid_argument("estimator gain must be in (0, 1]");
    }
    if (return_delay < 0 || backoff_window < 1) {
        throw std::invalid_argument("estimator delays must be non-negative and the window >= 1");
    }
}

double BacklogEstimator::backlog() const {
    return ready + std::accumulate(returning.begin(), returning.end(), 0.0);
}

BacklogEstimator update_estimate(const BacklogEstimator& est, const EstimatorParams& params,
                                 const SlotObservation& observation, std::int64_t preambles,
                                 double arrivals_estimate) {
    params.validate();
    if (observation.idle < 0 || observation.successes < 0 || observation.collided < 0 ||
        observation.preambles() != preambles) {
        throw std::invalid_argument("slot observation must partition the " + std::to_string(preambles) +
                                    " preambles into idle, successful and collided");
    }

    const auto successes = static_cast<double>(observation.successes);
    const auto collided = static_cast<double>(observation.collided);
    const double contenders =
        std::max(params.success_weight * successes + params.collision_weight * collided, successes + 2.0 * collided);

    // Eligible UEs the observation implies, given the announced pass rate.
    double implied = est.pass_probability > 0.0 ? contenders / est.pass_probability : est.ready;
    implied = std::max(implied, contenders);
    const double posterior = est.ready + params.gain * (implied - est.ready);
    const double barred = std::max(0.0, posterior - contenders);
    const double failed = std::max(0.0, contenders - successes);

    BacklogEstimator next;
    next.pass_probability = est.pass_probability;
    const auto horizon = static_cast<std::size_t>(params.return_delay + params.backoff_window);
    next.returning.assign(horizon, 0.0);
    for (std::size_t i = 1; i < est.returning.size() && i - 1 < horizon; ++i) {
        next.returning[i - 1] = est.returning[i];
    }
    // A UE failing now restarts after return_delay + U[1, window] slots; the
    // coming slot is offset 1, so offset d + b sits at index d + b - 1.
    const double share = failed / static_cast<double>(params.backoff_window);
    for (std::int64_t b = 1; b <= params.backoff_window; ++b) {
        next.returning[static_cast<std::size_t>(params.return_delay + b - 1)] += share;
    }
    const double back_now = est.returning.empty() ? 0.0 : est.returning.front();
    next.ready = std::max(0.0, barred + back_now + std::max(0.0, arrivals_estimate));
    return next;
}

void validate(const BarringPolicy& policy) {
    if (const auto* fixed = std::get_if<StaticPolicy>(&policy)) {
        if (fixed->per_class.empty()) {
            throw std::invalid_argument("static barring needs at least one class probability");
        }
        for (const double p : fixed->per_class) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw std::invalid_argument("barring probabilities must lie in [0, 1]");
            }
        }
    } else if (const auto* estimated = std::get_if<EstimatedPolicy>(&policy)) {
        estimated->params.validate();
    }
}

BarringController::BarringController(BarringPolicy policy, std::int64_t preambles, double initial_arrivals)
    : policy_(std::move(policy)), preambles_(preambles) {
    validate(policy_);
    if (preambles_ < 1) {
        throw std::invalid_argument("preambles must be >= 1");
    }
    estimator_.ready = std::max(0.0, initial_arrivals);
}

void BarringController::begin_slot(std::int64_t ready_backlog) {
    if (std::holds_alternative<FullStatePolicy>(policy_)) {
        common_probability_ = dynamic_barring_probability(static_cast<double>(ready_backlog), preambles_);
    } else if (std::holds_alternative<EstimatedPolicy>(policy_)) {
        common_probability_ = dynamic_barring_probability(estimator_.ready, preambles_);
        estimator_.pass_probability = 1.0 - common_probability_;
    }
}

double BarringController::barring_probability(ClassId cls) const {
    if (const auto* fixed = std::get_if<StaticPolicy>(&policy_)) {
        const auto i = class_index(cls);
        // A single entry applies to every class.
        return fixed->per_class.size() == 1 ? fixed->per_class.front() : fixed->per_class.at(i);
    }
    return common_probability_;
}

void BarringController::end_slot(const SlotObservation& observation, double next_arrivals_estimate) {
    if (const auto* estimated = std::get_if<EstimatedPolicy>(&policy_)) {
        estimator_ = update_estimate(estimator_, estimated->params, observation, preambles_, next_arrivals_estimate);
    }
}

std::optional<BacklogEstimator> BarringController::estimator() const {
    if (std::holds_alternative<EstimatedPolicy>(policy_)) {
        return estimator_;
    }
    return std::nullopt;
}

}  // namespace rach::barring
