#include "rach/analytics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rach {

namespace {

constexpr double kNoCollisionTolerance = 1e-12;
constexpr std::int64_t kDirectPowerLimit = 1000;

}  // namespace

void SlotLoad::validate() const {
    if (contenders < 0) {
        throw std::invalid_argument("contenders must be >= 0, got " + std::to_string(contenders));
    }
    if (preambles < 1) {
        throw std::invalid_argument("preambles must be >= 1, got " + std::to_string(preambles));
    }
}

BccrConfig BccrConfig::with_slots(int slots, double slot_resources) {
    if (slots < 0 || slots > 30) {
        throw std::invalid_argument("contention resolution slot count out of range: " + std::to_string(slots));
    }
    return BccrConfig{1 << slots, slot_resources};
}

int BccrConfig::slots() const {
    int k = 0;
    while ((std::int64_t{1} << k) < levels) {
        ++k;
    }
    return k;
}

void BccrConfig::validate() const {
    if (levels < 1) {
        throw std::invalid_argument("priority levels must be >= 1, got " + std::to_string(levels));
    }
    if (!(slot_resources >= 0.0)) {
        throw std::invalid_argument("resources per contention resolution slot must be >= 0");
    }
}

void ResourceModel::validate() const {
    if (!(msg1_total > 0.0) || !(msg3 > 0.0)) {
        throw std::invalid_argument("MSG1 and MSG3 resources must be > 0");
    }
}

namespace analytics {

double idle_probability_power(std::int64_t n, std::int64_t preambles) {
    if (n == 0) {
        return 1.0;
    }
    const double miss = 1.0 / static_cast<double>(preambles);
    if (n <= kDirectPowerLimit) {
        return std::pow(1.0 - miss, static_cast<double>(n));
    }
    return std::exp(static_cast<double>(n) * std::log1p(-miss));
}

double expected_success(const SlotLoad& load) {
    load.validate();
    if (load.contenders == 0) {
        return 0.0;
    }
    return static_cast<double>(load.contenders) * idle_probability_power(load.contenders - 1, load.preambles);
}

double expected_idle_preambles(const SlotLoad& load) {
    load.validate();
    return static_cast<double>(load.preambles) * idle_probability_power(load.contenders, load.preambles);
}

double expected_collided_preambles(const SlotLoad& load) {
    return static_cast<double>(load.preambles) - expected_success(load) - expected_idle_preambles(load);
}

std::optional<double> expected_collision_size(const SlotLoad& load) {
    const double collided = expected_collided_preambles(load);
    if (collided <= kNoCollisionTolerance) {
        return std::nullopt;
    }
    return (static_cast<double>(load.contenders) - expected_success(load)) / collided;
}

double contention_resolution_probability(double collision_size, int levels) {
    if (!(collision_size >= 1.0)) {
        throw std::domain_error("collision size must be >= 1");
    }
    if (levels < 1) {
        throw std::domain_error("priority levels must be >= 1");
    }
    const double l = levels;
    double total = 0.0;
    for (int p = 0; p <= levels - 2; ++p) {
        total += (collision_size / l) * std::pow(1.0 - (p + 1) / l, collision_size - 1.0);
    }
    return total;
}

double expected_success_bccr(const SlotLoad& load, const BccrConfig& cfg) {
    cfg.validate();
    const double base = expected_success(load);
    const auto size = expected_collision_size(load);
    if (!size || cfg.levels == 1) {
        return base;
    }
    return base + expected_collided_preambles(load) * contention_resolution_probability(*size, cfg.levels);
}

double expected_activated_preambles(const SlotLoad& load) {
    return static_cast<double>(load.preambles) - expected_idle_preambles(load);
}

double effective_throughput(const SlotLoad& load, const std::optional<BccrConfig>& cfg,
                            const ResourceModel& resources) {
    resources.validate();
    const double activated = expected_activated_preambles(load);
    if (!cfg) {
        return expected_success(load) / (resources.msg1_total + resources.msg3 * activated);
    }
    const double per_preamble = cfg->slots() * cfg->slot_resources + resources.msg3;
    return expected_success_bccr(load, *cfg) / (resources.msg1_total + per_preamble * activated);
}

double throughput_gain(const SlotLoad& load, const BccrConfig& cfg, const ResourceModel& resources) {
    const double base = effective_throughput(load, std::nullopt, resources);
    if (base <= 0.0) {
        throw std::domain_error("throughput gain undefined for an empty slot");
    }
    return effective_throughput(load, cfg, resources) / base;
}

AnalyticBreakdown breakdown(const SlotLoad& load, const BccrConfig& cfg, const ResourceModel& resources) {
    AnalyticBreakdown out;
    out.expected_success = expected_success(load);
    out.expected_idle = expected_idle_preambles(load);
    out.expected_collided = static_cast<double>(load.preambles) - out.expected_success - out.expected_idle;
    out.collision_size = expected_collision_size(load);
    out.cr_probability = out.collision_size ? contention_resolution_probability(*out.collision_size, cfg.levels) : 0.0;
    out.expected_success_bccr = expected_success_bccr(load, cfg);
    const double activated = expected_activated_preambles(load);
    out.resources_base = resources.msg1_total + resources.msg3 * activated;
    out.resources_bccr = resources.msg1_total + (cfg.slots() * cfg.slot_resources + resources.msg3) * activated;
    out.throughput_base = out.expected_success / out.resources_base;
    out.throughput_bccr = out.expected_success_bccr / out.resources_bccr;
    if (out.throughput_base > 0.0) {
        out.gain = out.throughput_bccr / out.throughput_base;
    }
    return out;
}

}  // namespace analytics
}  // namespace rach
