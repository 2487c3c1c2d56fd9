#include "rach/timing.hpp"

#include <stdexcept>

namespace rach::timing {

void TimingConfig::validate() const {
    if (!(crs_duration_s > 0.0)) {
        throw std::invalid_argument("micro-slot duration must be > 0");
    }
    if (!(transmit_ratio > 0.0 && transmit_ratio <= 1.0)) {
        throw std::invalid_argument("transmit ratio must be in (0, 1]");
    }
    if (!(propagation_speed > 0.0)) {
        throw std::invalid_argument("propagation speed must be > 0");
    }
}

bool is_feasible(const TimingConfig& cfg, double d1, double d2, double d12) {
    cfg.validate();
    if (d1 < 0.0 || d2 < 0.0 || d12 < 0.0) {
        throw std::invalid_argument("distances must be >= 0");
    }
    const double c = cfg.propagation_speed;
    return cfg.crs_duration_s >= (d2 - d1) / c + cfg.transmit_duration_s() + d12 / c;
}

bool is_feasible_simplified(const TimingConfig& cfg, double d12) {
    cfg.validate();
    if (d12 < 0.0) {
        throw std::invalid_argument("distances must be >= 0");
    }
    return cfg.crs_duration_s >= cfg.transmit_duration_s() + 2.0 * d12 / cfg.propagation_speed;
}

double max_hearing_distance(const TimingConfig& cfg) {
    cfg.validate();
    return cfg.propagation_speed * cfg.crs_duration_s * (1.0 - cfg.transmit_ratio) / 2.0;
}

}  // namespace rach::timing
