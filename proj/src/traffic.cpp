#include "rach/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

namespace rach::traffic {

void TrafficModel::validate() const {
    if (devices < 0) {
        throw std::invalid_argument("device count must be >= 0");
    }
    if (!(window_s > 0.0)) {
        throw std::invalid_argument("activation window must be > 0");
    }
    if (!(alpha > 0.0) || !(beta > 0.0)) {
        throw std::invalid_argument("beta shape parameters must be > 0");
    }
}

double activation_pdf(double t, const TrafficModel& model) {
    model.validate();
    if (!(t >= 0.0 && t <= model.window_s)) {
        throw std::domain_error("activation density evaluated outside [0, window]");
    }
    const double x = t / model.window_s;
    if ((x == 0.0 && model.alpha > 1.0) || (x == 1.0 && model.beta > 1.0)) {
        return 0.0;
    }
    const double log_density = (model.alpha - 1.0) * std::log(x) + (model.beta - 1.0) * std::log1p(-x) -
                               boost::math::lgamma(model.alpha) - boost::math::lgamma(model.beta) +
                               boost::math::lgamma(model.alpha + model.beta);
    return std::exp(log_density) / model.window_s;
}

double activation_cdf(double t, const TrafficModel& model) {
    model.validate();
    if (t <= 0.0) {
        return 0.0;
    }
    if (t >= model.window_s) {
        return 1.0;
    }
    return boost::math::ibeta(model.alpha, model.beta, t / model.window_s);
}

std::vector<double> sample_activation_times(const TrafficModel& model, Rng& rng) {
    model.validate();
    // X / (X + Y) with X ~ Gamma(alpha), Y ~ Gamma(beta) is Beta(alpha, beta).
    std::gamma_distribution<double> gx(model.alpha, 1.0);
    std::gamma_distribution<double> gy(model.beta, 1.0);
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(model.devices));
    for (std::int64_t i = 0; i < model.devices; ++i) {
        const double x = gx(rng);
        const double y = gy(rng);
        const double u = (x + y) > 0.0 ? x / (x + y) : 0.5;
        times.push_back(std::clamp(u, 0.0, 1.0) * model.window_s);
    }
    std::sort(times.begin(), times.end());
    return times;
}

std::int64_t activation_slot(double t, double prach_period_s) {
    if (!(prach_period_s > 0.0)) {
        throw std::invalid_argument("PRACH period must be > 0");
    }
    return static_cast<std::int64_t>(std::ceil(t / prach_period_s));
}

}  // namespace rach::traffic
