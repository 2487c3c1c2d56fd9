#include "rach/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rach/stats.hpp"

namespace rach::sim {

void Scenario::validate() const {
    traffic.validate();
    resources.validate();
    if (preambles < 1) {
        throw std::invalid_argument("scenario needs at least one preamble");
    }
    if (bccr) {
        bccr->validate();
    }
    barring::validate(barring);
    bccr::validate(priority);
    if (classes.empty()) {
        throw std::invalid_argument("scenario needs at least one traffic class");
    }
    double share_total = 0.0;
    for (const auto& c : classes) {
        if (!(c.share >= 0.0)) {
            throw std::invalid_argument("class share must be >= 0 for class '" + c.name + "'");
        }
        share_total += c.share;
    }
    if (std::abs(share_total - 1.0) > 1e-9) {
        throw std::invalid_argument("class shares must sum to 1");
    }
    if (const auto* fixed = std::get_if<barring::StaticPolicy>(&barring)) {
        if (fixed->per_class.size() != 1 && fixed->per_class.size() != classes.size()) {
            throw std::invalid_argument("static barring needs one probability, or one per class");
        }
    }
    if (bccr) {
        if (bccr::policy_levels(priority) != bccr->levels) {
            throw std::invalid_argument("priority policy levels (" + std::to_string(bccr::policy_levels(priority)) +
                                        ") differ from BCCR levels (" + std::to_string(bccr->levels) + ")");
        }
        if (const auto* band = std::get_if<bccr::ClassBand>(&priority)) {
            for (std::size_t i = 0; i < classes.size(); ++i) {
                if (!band->bands.contains(class_id(i))) {
                    throw std::invalid_argument("class '" + classes[i].name + "' has no priority band");
                }
            }
        }
    }
    if (!(prach_period_s > 0.0)) {
        throw std::invalid_argument("PRACH period must be > 0");
    }
    if (msg3_delay_slots < 0 || msg4_delay_slots < 0) {
        throw std::invalid_argument("message delays must be >= 0 slots");
    }
    if (backoff_window < 1) {
        throw std::invalid_argument("back-off window must be >= 1 slot");
    }
    if (retry_cap && *retry_cap < 1) {
        throw std::invalid_argument("retry cap must be >= 1");
    }
    if (horizon_slots < 1) {
        throw std::invalid_argument("horizon must be >= 1 slot");
    }
}

SlotResolution resolve_slot(std::span<const Attempt> attempts, std::int64_t preambles,
                            const std::optional<BccrConfig>& bccr) {
    SlotResolution out;
    out.results.assign(attempts.size(), AttemptResult::Collision);
    std::vector<std::vector<std::size_t>> by_preamble(static_cast<std::size_t>(preambles));
    for (std::size_t i = 0; i < attempts.size(); ++i) {
        const auto p = attempts[i].preamble;
        if (p < 0 || p >= preambles) {
            throw std::out_of_range("preamble index " + std::to_string(p) + " out of range");
        }
        by_preamble[static_cast<std::size_t>(p)].push_back(i);
    }

    std::vector<int> priorities;
    for (const auto& group : by_preamble) {
        if (group.empty()) {
            continue;
        }
        ++out.activated;
        if (group.size() == 1) {
            out.results[group.front()] = AttemptResult::Success;
            ++out.successes;
            continue;
        }
        if (!bccr) {
            ++out.failed_preambles;
            continue;
        }
        priorities.clear();
        for (const auto i : group) {
            priorities.push_back(attempts[i].priority);
        }
        const auto resolution = bccr::resolve_contention(priorities, bccr->slots());
        for (const auto i : group) {
            out.results[i] = AttemptResult::CrLoss;
        }
        if (resolution.has_winner()) {
            out.results[group[resolution.winner()]] = AttemptResult::Success;
            ++out.successes;
        } else {
            for (const auto s : resolution.survivors()) {
                out.results[group[s]] = AttemptResult::Collision;
            }
            ++out.failed_preambles;
        }
    }
    return out;
}

ServiceSummary summarize(std::span<const double> service_times) {
    ServiceSummary s;
    s.count = service_times.size();
    if (service_times.empty()) {
        return s;
    }
    s.mean_s = stats::mean(service_times);
    s.median_s = stats::quantile(service_times, 0.5);
    s.p99_s = stats::quantile(service_times, 0.99);
    return s;
}

namespace {

barring::BarringPolicy align_estimator(barring::BarringPolicy policy, const Scenario& s) {
    if (auto* estimated = std::get_if<barring::EstimatedPolicy>(&policy)) {
        estimated->params.return_delay = s.msg3_delay_slots + s.msg4_delay_slots;
        estimated->params.backoff_window = s.backoff_window;
    }
    return policy;
}

}  // namespace

Simulator::Simulator(Scenario scenario)
    : scenario_(std::move(scenario)),
      barring_(align_estimator(scenario_.barring, scenario_), scenario_.preambles),
      barring_rng_(make_stream(scenario_.seed, Stream::Barring)),
      preamble_rng_(make_stream(scenario_.seed, Stream::Preamble)),
      priority_rng_(make_stream(scenario_.seed, Stream::Priority)),
      backoff_rng_(make_stream(scenario_.seed, Stream::Backoff)) {
    scenario_.validate();
    auto activation_rng = make_stream(scenario_.seed, Stream::Activation);
    const auto times = traffic::sample_activation_times(scenario_.traffic, activation_rng);
    const auto n = times.size();

    // Class labels: rounded shares, remainder to the last class, randomly
    // matched to activation instants.
    std::vector<ClassId> labels;
    labels.reserve(n);
    for (std::size_t c = 0; c < scenario_.classes.size(); ++c) {
        const bool last = c + 1 == scenario_.classes.size();
        const auto count = last ? n - labels.size()
                                : std::min(n - labels.size(), static_cast<std::size_t>(std::llround(
                                                                  scenario_.classes[c].share * static_cast<double>(n))));
        labels.insert(labels.end(), count, class_id(c));
    }
    auto class_rng = make_stream(scenario_.seed, Stream::ClassAssignment);
    std::shuffle(labels.begin(), labels.end(), class_rng);

    ues_.resize(n);
    activation_order_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& ue = ues_[i];
        ue.id = static_cast<std::uint32_t>(i);
        ue.cls = labels[i];
        ue.activation_time = times[i];
        ue.activation_slot = traffic::activation_slot(times[i], scenario_.prach_period_s);
        activation_order_[i] = ue.id;
    }
    ready_.resize(scenario_.classes.size());
    first_slot_ = n == 0 ? 0 : ues_.front().activation_slot;
    slot_ = first_slot_;
    barring_ = barring::BarringController(align_estimator(scenario_.barring, scenario_), scenario_.preambles,
                                          expected_arrivals(first_slot_));
}

bool Simulator::finished() const {
    return connected_ + dropped_ == static_cast<std::int64_t>(ues_.size());
}

double Simulator::expected_arrivals(std::int64_t slot) const {
    const auto& model = scenario_.traffic;
    const double hi = traffic::activation_cdf(static_cast<double>(slot) * scenario_.prach_period_s, model);
    const double lo = slot <= 0 ? 0.0 : traffic::activation_cdf(static_cast<double>(slot - 1) * scenario_.prach_period_s, model);
    return static_cast<double>(model.devices) * (hi - lo);
}

void Simulator::schedule(std::int64_t slot, std::uint32_t ue, EventKind kind) {
    calendar_[slot].push_back(Event{ue, kind});
}

void Simulator::process_events() {
    const auto it = calendar_.find(slot_);
    if (it == calendar_.end()) {
        return;
    }
    for (const auto& ev : it->second) {
        auto& ue = ues_[ev.ue];
        switch (ev.kind) {
            case EventKind::StartBackoff:
                ue.phase = Phase::BackingOff;
                break;
            case EventKind::Return:
                ue.phase = Phase::Backlogged;
                ue.backoff_until = -1;
                ready_[class_index(ue.cls)].push_back(ue.id);
                break;
            case EventKind::Connect:
                ue.phase = Phase::Connected;
                ++connected_;
                samples_.push_back(static_cast<double>(slot_) * scenario_.prach_period_s - ue.activation_time);
                sample_classes_.push_back(ue.cls);
                break;
            case EventKind::Drop:
                ue.phase = Phase::Dropped;
                ++dropped_;
                break;
        }
    }
    calendar_.erase(it);
}

void Simulator::fail(std::uint32_t id, AttemptResult cause, std::int64_t start_slot, SlotEvents& events) {
    auto& ue = ues_[id];
    ++ue.attempts;
    BackoffStart b{id, cause, start_slot, -1};
    if (scenario_.retry_cap && ue.attempts >= *scenario_.retry_cap) {
        if (start_slot <= slot_) {
            ue.phase = Phase::Dropped;
            ++dropped_;
        } else {
            schedule(start_slot, id, EventKind::Drop);
        }
    } else {
        b.return_slot = start_slot + barring::draw_backoff(scenario_.backoff_window, backoff_rng_);
        ue.backoff_until = b.return_slot;
        if (start_slot <= slot_) {
            ue.phase = Phase::BackingOff;
        } else {
            schedule(start_slot, id, EventKind::StartBackoff);
        }
        schedule(b.return_slot, id, EventKind::Return);
    }
    events.backoffs.push_back(b);
}

SlotEvents Simulator::step_slot() {
    if (slot_ > scenario_.horizon_slots) {
        throw std::runtime_error("simulation exceeded the horizon of " + std::to_string(scenario_.horizon_slots) +
                                 " slots");
    }
    SlotEvents events;
    events.record.slot = slot_;

    process_events();
    while (next_activation_ < activation_order_.size() &&
           ues_[activation_order_[next_activation_]].activation_slot <= slot_) {
        auto& ue = ues_[activation_order_[next_activation_++]];
        ue.phase = Phase::Backlogged;
        ready_[class_index(ue.cls)].push_back(ue.id);
    }

    std::int64_t ready_total = 0;
    for (const auto& r : ready_) {
        ready_total += static_cast<std::int64_t>(r.size());
    }
    barring_.begin_slot(ready_total);
    events.record.barring_probability = barring_.barring_probability(class_id(0));

    // Per-UE Bernoulli barring is drawn as a binomial pass count followed by
    // a uniformly random subset of that size; the two are equal in law.
    std::vector<std::uint32_t> contenders;
    for (std::size_t c = 0; c < ready_.size(); ++c) {
        auto& pool = ready_[c];
        const double p_b = barring_.barring_probability(class_id(c));
        const auto n = static_cast<std::int64_t>(pool.size());
        std::int64_t passing = n;
        if (p_b >= 1.0) {
            passing = 0;
        } else if (p_b > 0.0 && n > 0) {
            std::binomial_distribution<std::int64_t> pass(n, 1.0 - p_b);
            passing = pass(barring_rng_);
        }
        for (std::int64_t i = 0; i < passing; ++i) {
            const auto last = static_cast<std::size_t>(n - 1 - i);
            std::uniform_int_distribution<std::size_t> pick(0, last);
            std::swap(pool[pick(barring_rng_)], pool[last]);
            contenders.push_back(pool[last]);
        }
        pool.resize(static_cast<std::size_t>(n - passing));
    }

    const auto& bccr = scenario_.bccr;
    std::uniform_int_distribution<std::int64_t> preamble(0, scenario_.preambles - 1);
    events.attempts.reserve(contenders.size());
    for (const auto id : contenders) {
        auto& ue = ues_[id];
        ue.phase = Phase::AwaitingMsg3;
        Attempt a{id, preamble(preamble_rng_), 0};
        if (bccr) {
            a.priority = bccr::draw_priority(scenario_.priority, ue.cls, priority_rng_);
            ue.priority = a.priority;
        }
        events.attempts.push_back(a);
    }

    const auto resolution = resolve_slot(events.attempts, scenario_.preambles, bccr);
    const auto cr_start = slot_ + scenario_.msg3_delay_slots;
    const auto timeout = cr_start + scenario_.msg4_delay_slots;
    for (std::size_t i = 0; i < events.attempts.size(); ++i) {
        const auto id = events.attempts[i].ue;
        switch (resolution.results[i]) {
            case AttemptResult::Success:
                schedule(timeout, id, EventKind::Connect);
                events.winners.push_back(id);
                break;
            case AttemptResult::CrLoss:
                ++events.record.cr_losers;
                fail(id, AttemptResult::CrLoss, cr_start, events);
                break;
            case AttemptResult::Collision:
                fail(id, AttemptResult::Collision, timeout, events);
                break;
        }
    }

    attempts_ += static_cast<std::int64_t>(events.attempts.size());
    successes_ += resolution.successes;
    if (!events.attempts.empty()) {
        last_msg1_slot_ = slot_;
    }
    const double cr_cost = bccr ? bccr->slots() * bccr->slot_resources : 0.0;
    preamble_resources_ += (cr_cost + scenario_.resources.msg3) * static_cast<double>(resolution.activated);

    barring::SlotObservation observation{scenario_.preambles - resolution.activated, resolution.successes,
                                         resolution.failed_preambles};
    barring_.end_slot(observation, expected_arrivals(slot_ + 1));

    events.record.contenders = static_cast<std::int64_t>(events.attempts.size());
    events.record.activated = resolution.activated;
    events.record.successes = resolution.successes;
    events.record.collisions = resolution.failed_preambles;
    if (scenario_.record_trace) {
        trace_.push_back(events.record);
    }
    ++slot_;
    return events;
}

RunMetrics Simulator::metrics() const {
    RunMetrics m;
    m.service_time_samples = samples_;
    m.sample_classes = sample_classes_;
    const auto all = summarize(samples_);
    m.mean_service_time_s = all.mean_s;
    m.median_service_time_s = all.median_s;
    m.p99_service_time_s = all.p99_s;

    m.per_class.resize(scenario_.classes.size());
    for (std::size_t c = 0; c < scenario_.classes.size(); ++c) {
        std::vector<double> mine;
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            if (class_index(sample_classes_[i]) == c) {
                mine.push_back(samples_[i]);
            }
        }
        m.per_class[c] = summarize(mine);
    }

    const std::int64_t prach_slots = last_msg1_slot_ < 0 ? 0 : last_msg1_slot_ - first_slot_ + 1;
    m.resources_used = scenario_.resources.msg1_total * static_cast<double>(prach_slots) + preamble_resources_;
    m.successes = successes_;
    m.attempts = attempts_;
    m.effective_throughput = m.resources_used > 0.0 ? static_cast<double>(successes_) / m.resources_used : 0.0;
    m.connected = connected_;
    m.dropped = dropped_;
    m.slots = slot_ - first_slot_;
    m.completion_fraction =
        ues_.empty() ? 1.0 : static_cast<double>(connected_) / static_cast<double>(ues_.size());
    m.trace = trace_;
    return m;
}

RunMetrics run(const Scenario& scenario) {
    Simulator sim(scenario);
    while (!sim.finished()) {
        sim.step_slot();
    }
    return sim.metrics();
}

}  // namespace rach::sim
