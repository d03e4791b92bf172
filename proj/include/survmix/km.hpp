#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace survmix {

// Right-continuous survival step function. S(t) = 1 before the first jump;
// values[j] holds S(t) for t in [jump_times[j], jump_times[j+1]); the last
// value is carried forward past the final jump.
struct StepSurvivalFunction {
  std::vector<double> jump_times;  // strictly increasing
  std::vector<double> values;      // same length, non-increasing, in [0,1]

  double at(double t) const {
    // right-continuous: the jump at t has already happened at t
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
  }

  double final_value() const { return values.empty() ? 1.0 : values.back(); }

  bool operator==(const StepSurvivalFunction&) const = default;
};

inline double survival_at(const StepSurvivalFunction& sf, double t) { return sf.at(t); }

inline nlohmann::json step_function_to_json(const StepSurvivalFunction& sf) {
  return {{"times", sf.jump_times}, {"values", sf.values}};
}

inline StepSurvivalFunction step_function_from_json(const nlohmann::json& j) {
  StepSurvivalFunction sf;
  sf.jump_times = j.at("times").get<std::vector<double>>();
  sf.values = j.at("values").get<std::vector<double>>();
  return sf;
}

// Product-limit estimate. At each distinct event time u with d_u events and
// n_u subjects at risk, survival multiplies by (1 - d_u/n_u). A censoring
// tied with an event at the same time still counts as at risk there (events
// processed first).
inline StepSurvivalFunction kaplan_meier(const std::vector<double>& times,
                                         const std::vector<std::uint8_t>& events) {
  if (times.empty()) throw std::invalid_argument("kaplan_meier: empty input");
  if (times.size() != events.size())
    throw std::invalid_argument("kaplan_meier: times/events length mismatch");
  for (double t : times)
    if (!(t >= 0.0)) throw std::invalid_argument("kaplan_meier: times must be non-negative");

  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  StepSurvivalFunction sf;
  double surv = 1.0;
  std::size_t n = times.size();
  std::size_t i = 0;
  std::size_t at_risk = n;
  while (i < n) {
    double u = times[order[i]];
    std::size_t d = 0, group = 0;
    while (i < n && times[order[i]] == u) {
      d += events[order[i]];
      ++group;
      ++i;
    }
    if (d > 0) {
      surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      sf.jump_times.push_back(u);
      sf.values.push_back(surv);
    }
    at_risk -= group;
  }
  return sf;
}

struct MassPoint {
  double time;
  double mass;
};

// Probability masses at the KM jumps: mass_j = S(t_j-) - S(t_j). They sum to
// 1 - final survival value; the deficit is mass beyond the last observed
// time when the largest observation is censored.
inline std::vector<MassPoint> km_mass(const StepSurvivalFunction& sf) {
  std::vector<MassPoint> masses;
  masses.reserve(sf.jump_times.size());
  double prev = 1.0;
  for (std::size_t j = 0; j < sf.jump_times.size(); ++j) {
    masses.push_back({sf.jump_times[j], prev - sf.values[j]});
    prev = sf.values[j];
  }
  return masses;
}

}  // namespace survmix
