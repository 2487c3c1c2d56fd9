#pragma once

#include <cstdint>
#include <vector>

#include "rach/random.hpp"

namespace rach::traffic {

/// Burst of `devices` UEs waking up within `window_s`; each activation
/// instant is Beta(alpha, beta) scaled to the window.
struct TrafficModel {
    std::int64_t devices = 0;
    double window_s = 1.0;
    double alpha = 3.0;
    double beta = 4.0;

    void validate() const;
};

/// Beta density scaled to [0, T]: t^(a-1) (T-t)^(b-1) / (T^(a+b-1) B(a, b)).
/// Throws std::domain_error outside the window.
double activation_pdf(double t, const TrafficModel& model);

/// Probability that a UE activates by time t (regularized incomplete beta).
double activation_cdf(double t, const TrafficModel& model);

/// Activation instants of all devices, ascending.
std::vector<double> sample_activation_times(const TrafficModel& model, Rng& rng);

/// First PRACH slot at or after the activation instant.
std::int64_t activation_slot(double t, double prach_period_s);

}  // namespace rach::traffic
