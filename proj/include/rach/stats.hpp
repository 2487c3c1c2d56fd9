#pragma once

#include <span>
#include <vector>

namespace rach::stats {

double mean(std::span<const double> values);

/// Sample quantile with linear interpolation between order statistics
/// (q in [0, 1]). Throws std::invalid_argument on an empty sample.
double quantile(std::span<const double> values, double q);

/// Half-width of the two-sided 95 % Student-t confidence interval of the
/// mean; 0 for fewer than two values.
double ci95_halfwidth(std::span<const double> values);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Two-sided Kolmogorov-Smirnov distance between a sample and a CDF.
template <typename Cdf>
double ks_distance(std::vector<double> sample, Cdf&& cdf);

}  // namespace rach::stats

#include <algorithm>
#include <cmath>

template <typename Cdf>
double rach::stats::ks_distance(std::vector<double> sample, Cdf&& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        worst = std::max({worst, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    return worst;
}
