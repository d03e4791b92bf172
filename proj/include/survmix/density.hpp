#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "survmix/km.hpp"

namespace survmix {

inline constexpr double kDefaultDensityFloor = 1e-12;

// Gaussian-kernel smoothing of the KM probability masses:
//   f(t) = floor + sum_j mass_j * K_h(t - t_j).
// The floor keeps evaluations strictly positive so likelihood ratios stay
// finite for points outside a cluster's support.
struct SmoothedDensity {
  std::vector<MassPoint> mass_points;  // sorted by time
  double bandwidth = 1.0;
  double floor = kDefaultDensityFloor;

  double operator()(double t) const {
    const double h = bandwidth;
    // kernel contributions beyond 8h are below ~1e-14 of the mass
    const double cut = 8.0 * h;
    auto lo = std::lower_bound(mass_points.begin(), mass_points.end(), t - cut,
                               [](const MassPoint& m, double v) { return m.time < v; });
    const double inv_norm = 1.0 / (h * 2.5066282746310005024);  // h*sqrt(2*pi)
    double acc = 0.0;
    for (auto it = lo; it != mass_points.end() && it->time <= t + cut; ++it) {
      double z = (t - it->time) / h;
      acc += it->mass * std::exp(-0.5 * z * z);
    }
    return floor + acc * inv_norm;
  }
};

// Normal-reference plug-in bandwidth over the uncensored event times:
//   1.06 * min(sd, IQR/1.34) * n^(-1/5).
// Computed once on the full training set and held fixed across EM steps.
// Falls back to the sd when the IQR is zero (heavily tied times).
inline double plugin_bandwidth(const std::vector<double>& uncensored_times) {
  std::set<double> distinct(uncensored_times.begin(), uncensored_times.end());
  if (distinct.size() < 2)
    throw std::invalid_argument(
        "plugin_bandwidth: needs >= 2 distinct uncensored times; supply a bandwidth explicitly");

  std::size_t n = uncensored_times.size();
  double mean = 0.0;
  for (double t : uncensored_times) mean += t;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double t : uncensored_times) ss += (t - mean) * (t - mean);
  double sd = std::sqrt(ss / static_cast<double>(n - 1));

  std::vector<double> sorted(uncensored_times);
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    double pos = p * static_cast<double>(n - 1);
    auto lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= n) return sorted[n - 1];
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
  };
  double iqr = quantile(0.75) - quantile(0.25);

  double scale = std::min(sd, iqr / 1.34);
  if (!(scale > 0.0)) scale = sd;
  return 1.06 * scale * std::pow(static_cast<double>(n), -0.2);
}

inline SmoothedDensity smoothed_density(const StepSurvivalFunction& sf, double bandwidth,
                                        double floor = kDefaultDensityFloor) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("smoothed_density: bandwidth must be > 0");
  if (!(floor > 0.0)) throw std::invalid_argument("smoothed_density: floor must be > 0");
  return {km_mass(sf), bandwidth, floor};
}

}  // namespace survmix
