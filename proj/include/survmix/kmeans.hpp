#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "survmix/data.hpp"
#include "survmix/km.hpp"
#include "survmix/rng.hpp"

namespace survmix {

struct KMeansResult {
  Matrix centroids;  // k x m
  std::vector<std::size_t> labels;  // 1-based
  double wcss = 0.0;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double d = a[j] - b[j];
    acc += d * d;
  }
  return acc;
}

}  // namespace detail

// Lloyd's algorithm with distance-weighted (k-means++ style) seeding.
// Deterministic per seed; an emptied cluster is refilled with the point
// farthest from its assigned centroid.
inline KMeansResult kmeans_fit(const Matrix& features, std::size_t k, std::uint64_t seed,
                               std::size_t max_iters = 100) {
  std::size_t n = features.rows(), m = features.cols();
  if (k == 0) throw std::invalid_argument("kmeans_fit: k must be >= 1");
  if (n < k) throw std::invalid_argument("kmeans_fit: n < k");

  Rng rng(seed);
  Matrix centroids(k, m);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
  for (std::size_t j = 0; j < m; ++j) centroids(0, j) = features(first, j);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i], detail::sq_dist(features.row(i), centroids.row(c - 1)));
      total += min_d[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double r = rng.uniform() * total, acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_d[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
    }
    for (std::size_t j = 0; j < m; ++j) centroids(c, j) = features(pick, j);
  }

  std::vector<std::size_t> labels(n, 0);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = detail::sq_dist(features.row(i), centroids.row(0));
      for (std::size_t c = 1; c < k; ++c) {
        double d = detail::sq_dist(features.row(i), centroids.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best + 1) {
        labels[i] = best + 1;
        changed = true;
      }
    }

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t label : labels) ++counts[label - 1];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      // refill with the farthest point from its centroid, among clusters
      // that can spare one
      std::size_t pick = n;
      double far = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[labels[i] - 1] <= 1) continue;
        double d = detail::sq_dist(features.row(i), centroids.row(labels[i] - 1));
        if (d > far) {
          far = d;
          pick = i;
        }
      }
      --counts[labels[pick] - 1];
      labels[pick] = c + 1;
      ++counts[c];
      changed = true;
    }

    centroids = Matrix(k, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) centroids(labels[i] - 1, j) += features(i, j);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j < m; ++j) centroids(c, j) /= static_cast<double>(counts[c]);

    if (!changed) break;
  }

  double wcss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    wcss += detail::sq_dist(features.row(i), centroids.row(labels[i] - 1));
  return {std::move(centroids), std::move(labels), wcss};
}

// Unsupervised K-means on the features; the survival adaptation happens at
// inference only, by returning the KM curve of the assigned cluster.
struct KMeansSurvivalModel {
  Matrix centroids;
  std::vector<StepSurvivalFunction> curves;
  std::vector<std::size_t> member_counts;
  double time_min = 0.0;
  double time_max = 0.0;

  std::size_t k() const { return curves.size(); }
};

inline KMeansSurvivalModel kmeans_survival_fit(const SurvivalDataset& ds, std::size_t k,
                                               std::uint64_t seed, std::size_t max_iters = 100) {
  KMeansResult km = kmeans_fit(ds.features, k, seed, max_iters);
  KMeansSurvivalModel model;
  model.centroids = std::move(km.centroids);
  for (std::size_t c = 1; c <= k; ++c) {
    std::vector<double> t;
    std::vector<std::uint8_t> d;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (km.labels[i] == c) {
        t.push_back(ds.times[i]);
        d.push_back(ds.events[i]);
      }
    model.curves.push_back(kaplan_meier(t, d));
    model.member_counts.push_back(t.size());
  }
  auto [lo, hi] = std::minmax_element(ds.times.begin(), ds.times.end());
  model.time_min = *lo;
  model.time_max = *hi;
  return model;
}

inline std::size_t kmeans_assign(const KMeansSurvivalModel& model, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = detail::sq_dist(x, model.centroids.row(0));
  for (std::size_t c = 1; c < model.k(); ++c) {
    double d = detail::sq_dist(x, model.centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best + 1;
}

inline std::vector<double> kmeans_survival_predict(const KMeansSurvivalModel& model,
                                                   std::span<const double> x,
                                                   std::span<const double> grid) {
  const StepSurvivalFunction& sf = model.curves[kmeans_assign(model, x) - 1];
  std::vector<double> out(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) out[g] = sf.at(grid[g]);
  return out;
}

inline nlohmann::json kmeans_model_to_json(const KMeansSurvivalModel& model) {
  nlohmann::json cents = nlohmann::json::array();
  for (std::size_t c = 0; c < model.centroids.rows(); ++c) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < model.centroids.cols(); ++j) row.push_back(model.centroids(c, j));
    cents.push_back(std::move(row));
  }
  nlohmann::json curves = nlohmann::json::array();
  for (std::size_t c = 0; c < model.k(); ++c) {
    nlohmann::json cj = step_function_to_json(model.curves[c]);
    cj["member_count"] = model.member_counts[c];
    curves.push_back(std::move(cj));
  }
  return {{"version", 1},
          {"type", "kmeans_survival"},
          {"k", model.k()},
          {"n_features", model.centroids.cols()},
          {"centroids", cents},
          {"curves", curves},
          {"time_range", {model.time_min, model.time_max}}};
}

inline KMeansSurvivalModel kmeans_model_from_json(const nlohmann::json& j) {
  if (j.at("type").get<std::string>() != "kmeans_survival")
    throw std::runtime_error("kmeans_model_from_json: not a kmeans_survival model file");
  KMeansSurvivalModel model;
  std::size_t k = j.at("k").get<std::size_t>();
  std::size_t m = j.at("n_features").get<std::size_t>();
  model.centroids = Matrix(k, m);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t jj = 0; jj < m; ++jj)
      model.centroids(c, jj) = j.at("centroids")[c][jj].get<double>();
  for (const auto& cj : j.at("curves")) {
    model.curves.push_back(step_function_from_json(cj));
    model.member_counts.push_back(cj.at("member_count").get<std::size_t>());
  }
  model.time_min = j.at("time_range")[0].get<double>();
  model.time_max = j.at("time_range")[1].get<double>();
  return model;
}

}  // namespace survmix
