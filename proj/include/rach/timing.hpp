#pragma once

namespace rach::timing {

/// Micro-slot timing. UEs broadcast only during the first `transmit_ratio`
/// fraction of each contention resolution micro-slot; the remainder absorbs
/// propagation differences between contenders.
struct TimingConfig {
    double crs_duration_s = 66.67e-6;  // one LTE symbol
    double transmit_ratio = 0.9;
    double propagation_speed = 2.998e8;  // m/s

    void validate() const;
    double transmit_duration_s() const { return transmit_ratio * crs_duration_s; }
};

/// Whether the farther UE's broadcast reaches the nearer UE within the
/// micro-slot. d1 and d2 are the distances of the nearer and farther UE to
/// the base station, d12 their mutual distance (all in meters).
bool is_feasible(const TimingConfig& cfg, double d1, double d2, double d12);

/// Sufficient condition obtained from the triangle inequality:
/// t_crs >= t'_crs + 2 d12 / c.
bool is_feasible_simplified(const TimingConfig& cfg, double d12);

/// Largest UE-to-UE distance satisfying the simplified condition.
double max_hearing_distance(const TimingConfig& cfg);

}  // namespace rach::timing
