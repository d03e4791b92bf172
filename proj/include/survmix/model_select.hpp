#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "survmix/data.hpp"
#include "survmix/kmeans.hpp"
#include "survmix/metrics.hpp"
#include "survmix/mixture.hpp"
#include "survmix/rng.hpp"

namespace survmix {

struct KSelectionRow {
  std::size_t k = 0;
  std::size_t fold = 0;
  double c_index = 0.0;
};

struct KSelection {
  std::size_t best_k = 0;
  std::vector<KSelectionRow> rows;  // one row per (k, fold)
  std::vector<std::pair<std::size_t, double>> mean_by_k;
};

namespace detail {

// censoring-stratified fold assignment, deterministic per seed
inline std::vector<std::size_t> cv_folds(const std::vector<std::uint8_t>& events,
                                         std::size_t n_folds, std::uint64_t seed) {
  std::vector<std::size_t> censored, uncensored;
  for (std::size_t i = 0; i < events.size(); ++i)
    (events[i] == 0 ? censored : uncensored).push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> fold(events.size(), 0);
  std::size_t next = 0;
  for (auto* pool : {&censored, &uncensored}) {
    rng.shuffle(*pool);
    for (std::size_t i : *pool) fold[i] = next++ % n_folds;
  }
  return fold;
}

inline std::vector<double> eval_grid(double max_time, std::size_t points = 100) {
  std::vector<double> grid(points);
  for (std::size_t g = 0; g < points; ++g)
    grid[g] = max_time * static_cast<double>(g) / static_cast<double>(points - 1);
  return grid;
}

}  // namespace detail

// 3-fold cross-validation over the k grid, scored by validation
// time-dependent C-index; the best k maximizes the fold mean (ties to the
// smaller k). Pass the combined training + validation data.
template <typename FitPredict>
KSelection select_k_generic(const SurvivalDataset& ds, const std::vector<std::size_t>& k_grid,
                            std::uint64_t seed, FitPredict&& fit_predict,
                            std::size_t n_folds = 3) {
  if (k_grid.empty()) throw std::invalid_argument("select_k: empty k grid");
  std::vector<std::size_t> fold = detail::cv_folds(ds.events, n_folds, derive_seed(seed, 777));
  double max_time = *std::max_element(ds.times.begin(), ds.times.end());
  std::vector<double> grid = detail::eval_grid(max_time);

  KSelection sel;
  for (std::size_t k : k_grid) {
    double acc = 0.0;
    for (std::size_t f = 0; f < n_folds; ++f) {
      std::vector<std::size_t> tr, va;
      for (std::size_t i = 0; i < ds.size(); ++i) (fold[i] == f ? va : tr).push_back(i);
      SurvivalDataset train = subset(ds, tr), val = subset(ds, va);
      CurvePredictions pred;
      pred.grid = grid;
      try {
        pred.values = fit_predict(train, k, derive_seed(derive_seed(seed, 1000 + k), f), val, grid);
      } catch (const std::exception& e) {
        throw std::runtime_error("select_k: k=" + std::to_string(k) + " fold " +
                                 std::to_string(f) + " failed: " + e.what());
      }
      double c = td_c_index(pred, val.times, val.events);
      sel.rows.push_back({k, f, c});
      acc += c;
    }
    sel.mean_by_k.emplace_back(k, acc / static_cast<double>(n_folds));
  }

  sel.best_k = sel.mean_by_k.front().first;
  double best = sel.mean_by_k.front().second;
  for (const auto& [k, mean] : sel.mean_by_k)
    if (mean > best) {
      best = mean;
      sel.best_k = k;
    }
  return sel;
}

// SurvMixClust model selection; returns the report only, refit is the
// caller's step (Appendix-style: retrain on the full combined data).
inline KSelection select_k(const SurvivalDataset& ds, const std::vector<std::size_t>& k_grid,
                           const FitConfig& config) {
  return select_k_generic(
      ds, k_grid, config.seed,
      [&](const SurvivalDataset& train, std::size_t k, std::uint64_t fit_seed,
          const SurvivalDataset& val, const std::vector<double>& grid) {
        FitConfig c = config;
        c.k = k;
        c.seed = fit_seed;
        SurvMixModel model = fit(train, c);
        Matrix curves(val.size(), grid.size());
        for (std::size_t i = 0; i < val.size(); ++i) {
          auto row = predict_survival(model, val.features.row(i), grid);
          for (std::size_t g = 0; g < grid.size(); ++g) curves(i, g) = row[g];
        }
        return curves;
      });
}

inline KSelection select_k_kmeans(const SurvivalDataset& ds,
                                  const std::vector<std::size_t>& k_grid, std::uint64_t seed) {
  return select_k_generic(
      ds, k_grid, seed,
      [&](const SurvivalDataset& train, std::size_t k, std::uint64_t fit_seed,
          const SurvivalDataset& val, const std::vector<double>& grid) {
        KMeansSurvivalModel model = kmeans_survival_fit(train, k, fit_seed);
        Matrix curves(val.size(), grid.size());
        for (std::size_t i = 0; i < val.size(); ++i) {
          auto row = kmeans_survival_predict(model, val.features.row(i), grid);
          for (std::size_t g = 0; g < grid.size(); ++g) curves(i, g) = row[g];
        }
        return curves;
      });
}

}  // namespace survmix
