#include "rach/bccr.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace rach::bccr {

namespace {

void check_priority(int priority, int slots) {
    if (slots < 0 || slots > 30) {
        throw std::domain_error("micro-slot count out of range: " + std::to_string(slots));
    }
    if (priority < 0 || priority > (1 << slots) - 1) {
        throw std::domain_error("priority " + std::to_string(priority) + " not representable in " +
                                std::to_string(slots) + " micro-slots");
    }
}

// Bit j (most significant first) of the countdown value.
bool sequence_bit(int priority, int slots, int j) {
    const int value = (1 << slots) - 1 - priority;
    return ((value >> (slots - 1 - j)) & 1) != 0;
}

}  // namespace

PrioritySequence encode_priority(int priority, int slots) {
    check_priority(priority, slots);
    PrioritySequence seq{priority, {}};
    seq.bits.reserve(static_cast<std::size_t>(slots));
    for (int j = 0; j < slots; ++j) {
        seq.bits.push_back(sequence_bit(priority, slots, j) ? 1 : 0);
    }
    return seq;
}

int decode_priority(std::span<const std::uint8_t> bits) {
    int value = 0;
    for (const auto bit : bits) {
        if (bit > 1) {
            throw std::domain_error("countdown sequence symbols must be 0 or 1");
        }
        value = (value << 1) | bit;
    }
    return (1 << bits.size()) - 1 - value;
}

std::size_t Resolution::winner() const {
    if (kind_ != Kind::Winner) {
        throw std::logic_error("resolution has no winner");
    }
    return survivors_.front();
}

ResolutionTrace resolve_contention_traced(std::span<const int> priorities, int slots) {
    for (const int p : priorities) {
        check_priority(p, slots);
    }
    ResolutionTrace trace;
    trace.dropped_at.assign(priorities.size(), std::nullopt);
    if (priorities.empty()) {
        return trace;
    }

    std::vector<std::size_t> active(priorities.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
        active[i] = i;
    }

    for (int j = 0; j < slots; ++j) {
        std::vector<std::size_t> broadcasting;
        for (const auto i : active) {
            if (sequence_bit(priorities[i], slots, j)) {
                broadcasting.push_back(i);
            }
        }
        if (!broadcasting.empty()) {
            // Every listener hears the carrier and leaves.
            for (const auto i : active) {
                if (!sequence_bit(priorities[i], slots, j)) {
                    trace.dropped_at[i] = j;
                }
            }
            active = broadcasting;
        }
        trace.broadcasters.push_back(std::move(broadcasting));
    }

    trace.outcome = active.size() == 1 ? Resolution::winner(active.front()) : Resolution::collision(active);
    return trace;
}

Resolution resolve_contention(std::span<const int> priorities, int slots) {
    return resolve_contention_traced(priorities, slots).outcome;
}

Resolution resolve_by_minimum(std::span<const int> priorities) {
    if (priorities.empty()) {
        return Resolution::empty();
    }
    const int best = *std::min_element(priorities.begin(), priorities.end());
    std::vector<std::size_t> tied;
    for (std::size_t i = 0; i < priorities.size(); ++i) {
        if (priorities[i] == best) {
            tied.push_back(i);
        }
    }
    return tied.size() == 1 ? Resolution::winner(tied.front()) : Resolution::collision(std::move(tied));
}

ClassBand split_two_classes(int levels) {
    if (levels < 2) {
        throw std::invalid_argument("two-class banding needs at least 2 priority levels");
    }
    ClassBand band{levels, {}};
    band.bands[class_id(0)] = PriorityRange{0, levels / 2 - 1};
    band.bands[class_id(1)] = PriorityRange{levels / 2, levels - 1};
    return band;
}

int policy_levels(const PriorityPolicy& policy) {
    return std::visit([](const auto& p) { return p.levels; }, policy);
}

void validate(const PriorityPolicy& policy) {
    if (policy_levels(policy) < 1) {
        throw std::invalid_argument("priority policy needs at least one level");
    }
    if (const auto* band = std::get_if<ClassBand>(&policy)) {
        std::vector<bool> taken(static_cast<std::size_t>(band->levels), false);
        for (const auto& [cls, range] : band->bands) {
            if (range.first < 0 || range.last >= band->levels || range.first > range.last) {
                throw std::invalid_argument("priority band for class " + std::to_string(class_index(cls)) +
                                            " is outside [0, levels)");
            }
            for (int p = range.first; p <= range.last; ++p) {
                if (taken[static_cast<std::size_t>(p)]) {
                    throw std::invalid_argument("priority bands overlap at level " + std::to_string(p));
                }
                taken[static_cast<std::size_t>(p)] = true;
            }
        }
    }
}

int draw_priority(const PriorityPolicy& policy, std::optional<ClassId> cls, Rng& rng) {
    if (const auto* uniform = std::get_if<UniformRandom>(&policy)) {
        std::uniform_int_distribution<int> dist(0, uniform->levels - 1);
        return dist(rng);
    }
    const auto& band = std::get<ClassBand>(policy);
    if (!cls) {
        throw std::invalid_argument("class-banded priorities need a traffic class");
    }
    const auto it = band.bands.find(*cls);
    if (it == band.bands.end()) {
        throw std::invalid_argument("no priority band for class " + std::to_string(class_index(*cls)));
    }
    std::uniform_int_distribution<int> dist(it->second.first, it->second.last);
    return dist(rng);
}

}  // namespace rach::bccr
