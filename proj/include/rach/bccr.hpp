#pragma once

// Binary countdown contention resolution among UEs that activated the same
// preamble. Before MSG3, each UE walks through k micro-slots; in slot j it
// broadcasts if bit j of its sequence is 1, otherwise it listens and quits
// as soon as it hears anyone.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rach/random.hpp"

namespace rach {

/// Traffic class index. Scenarios name their classes; the index is the
/// position in the scenario's class list.
enum class ClassId : std::uint8_t {};

constexpr ClassId class_id(std::size_t index) { return static_cast<ClassId>(index); }
constexpr std::size_t class_index(ClassId id) { return static_cast<std::size_t>(id); }

namespace bccr {

/// Priority level (0 is the highest) and its k-bit countdown sequence,
/// most significant bit first. The bits spell (2^k - 1 - priority).
struct PrioritySequence {
    int priority = 0;
    std::vector<std::uint8_t> bits;
};

PrioritySequence encode_priority(int priority, int slots);
int decode_priority(std::span<const std::uint8_t> bits);

class Resolution {
public:
    enum class Kind { Empty, Winner, Collision };

    static Resolution empty() { return Resolution(Kind::Empty, {}); }
    static Resolution winner(std::size_t index) { return Resolution(Kind::Winner, {index}); }
    static Resolution collision(std::vector<std::size_t> survivors) {
        return Resolution(Kind::Collision, std::move(survivors));
    }

    Kind kind() const { return kind_; }
    bool has_winner() const { return kind_ == Kind::Winner; }
    std::size_t winner() const;
    /// Contenders still active after the last micro-slot, ascending.
    const std::vector<std::size_t>& survivors() const { return survivors_; }

    friend bool operator==(const Resolution&, const Resolution&) = default;

private:
    Resolution(Kind kind, std::vector<std::size_t> survivors) : kind_(kind), survivors_(std::move(survivors)) {}

    Kind kind_;
    std::vector<std::size_t> survivors_;
};

/// Per micro-slot record of who broadcast, plus the micro-slot at which each
/// contender dropped out (nullopt for survivors).
struct ResolutionTrace {
    Resolution outcome = Resolution::empty();
    std::vector<std::vector<std::size_t>> broadcasters;
    std::vector<std::optional<int>> dropped_at;
};

/// Runs the k micro-slots over contenders with the given priorities.
/// Throws std::domain_error if a priority is outside [0, 2^k - 1].
Resolution resolve_contention(std::span<const int> priorities, int slots);
ResolutionTrace resolve_contention_traced(std::span<const int> priorities, int slots);

/// The closed description of what the micro-slots compute: a unique minimum
/// priority wins, a tied minimum leaves the tied set.
Resolution resolve_by_minimum(std::span<const int> priorities);

struct PriorityRange {
    int first = 0;
    int last = 0;  // inclusive
};

struct UniformRandom {
    int levels = 1;
};

struct ClassBand {
    int levels = 1;
    std::map<ClassId, PriorityRange> bands;
};

using PriorityPolicy = std::variant<UniformRandom, ClassBand>;

/// Default two-class banding: class 0 ("prio") takes the lower half of the
/// priority values, which win, and class 1 the upper half.
ClassBand split_two_classes(int levels);

int policy_levels(const PriorityPolicy& policy);
void validate(const PriorityPolicy& policy);

/// Throws std::invalid_argument if ClassBand is used without a class, or
/// with a class that owns no band.
int draw_priority(const PriorityPolicy& policy, std::optional<ClassId> cls, Rng& rng);

}  // namespace bccr
}  // namespace rach
