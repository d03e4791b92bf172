#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "survmix/data.hpp"
#include "survmix/kmeans.hpp"
#include "survmix/metrics.hpp"
#include "survmix/mixture.hpp"
#include "survmix/model_select.hpp"
#include "survmix/preprocess.hpp"
#include "survmix/split.hpp"

namespace survmix {

struct BenchmarkOptions {
  std::size_t n_resplits = 20;
  double f_train = 0.6, f_val = 0.2, f_test = 0.2;
  std::uint64_t seed = 0;
  std::vector<std::size_t> k_grid = {2};  // singleton grid = fixed k, no CV
  FitConfig fit_config;
  std::size_t grid_points = 100;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

struct BenchmarkRow {
  std::size_t resplit = 0;
  std::string model;  // "survmixclust" or "kmeans"
  std::size_t k = 0;
  double c_index = 0.0;
  bool logrank_valid = false;
  double logrank_stat = 0.0;
  std::size_t logrank_df = 0;
  double logrank_p = 1.0;
  std::string note;
};

namespace detail {

// compress 1-based labels to a dense 1..G range, dropping empty groups
inline std::vector<std::size_t> compress_groups(const std::vector<std::size_t>& labels,
                                                std::size_t k) {
  std::vector<std::size_t> map(k + 1, 0);
  for (std::size_t label : labels) map[label] = 1;
  std::size_t next = 0;
  for (std::size_t c = 1; c <= k; ++c)
    if (map[c]) map[c] = ++next;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = map[labels[i]];
  return out;
}

inline void fill_logrank(BenchmarkRow& row, const std::vector<std::size_t>& clusters,
                         std::size_t k, const SurvivalDataset& test) {
  auto groups = compress_groups(clusters, k);
  std::size_t n_groups = *std::max_element(groups.begin(), groups.end());
  if (n_groups < 2) {
    row.note = "logrank omitted: single non-empty cluster";
    return;
  }
  try {
    LogrankResult lr = logrank_test(groups, test.times, test.events);
    row.logrank_valid = true;
    row.logrank_stat = lr.statistic;
    row.logrank_df = lr.df;
    row.logrank_p = lr.p_value;
  } catch (const std::exception& e) {
    row.note = std::string("logrank omitted: ") + e.what();
  }
}

}  // namespace detail

// One resplit of the evaluation protocol: 60/20/20 censoring-stratified
// split, model selection (or fixed k) on train+validation, refit on the
// combined part, metrics on the held-out test part. Preprocessing is fitted
// on train+validation only.
inline std::vector<BenchmarkRow> run_resplit(const RawTable& raw, std::size_t resplit,
                                             const BenchmarkOptions& opt) {
  std::uint64_t seed = derive_seed(opt.seed, resplit);
  SplitIndices idx =
      stratified_split_indices(raw.events, opt.f_train, opt.f_val, opt.f_test, seed);

  std::vector<std::size_t> trainval_idx = idx.train;
  trainval_idx.insert(trainval_idx.end(), idx.val.begin(), idx.val.end());
  std::sort(trainval_idx.begin(), trainval_idx.end());

  RawTable raw_tv = subset_raw(raw, trainval_idx);
  RawTable raw_test = subset_raw(raw, idx.test);
  PreprocessRecipe recipe = fit_preprocess(raw_tv);
  SurvivalDataset tv = apply_preprocess(raw_tv, recipe);
  SurvivalDataset test = apply_preprocess(raw_test, recipe);

  double max_time = std::max(*std::max_element(tv.times.begin(), tv.times.end()),
                             *std::max_element(test.times.begin(), test.times.end()));
  std::vector<double> grid = detail::eval_grid(max_time, opt.grid_points);

  std::vector<BenchmarkRow> rows;

  {  // SurvMixClust
    FitConfig config = opt.fit_config;
    config.seed = derive_seed(seed, 11);
    std::size_t k = opt.k_grid.front();
    if (opt.k_grid.size() > 1) k = select_k(tv, opt.k_grid, config).best_k;
    config.k = k;
    SurvMixModel model = fit(tv, config);

    CurvePredictions pred;
    pred.grid = grid;
    pred.values = Matrix(test.size(), grid.size());
    std::vector<std::size_t> clusters(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      auto row = predict_survival(model, test.features.row(i), grid);
      for (std::size_t g = 0; g < grid.size(); ++g) pred.values(i, g) = row[g];
      clusters[i] = predict_cluster(model, test.features.row(i));
    }
    BenchmarkRow row;
    row.resplit = resplit;
    row.model = "survmixclust";
    row.k = k;
    row.c_index = td_c_index(pred, test.times, test.events);
    detail::fill_logrank(row, clusters, k, test);
    rows.push_back(std::move(row));
  }

  {  // K-means Survival
    std::uint64_t km_seed = derive_seed(seed, 22);
    std::size_t k = opt.k_grid.front();
    if (opt.k_grid.size() > 1) k = select_k_kmeans(tv, opt.k_grid, km_seed).best_k;
    KMeansSurvivalModel model = kmeans_survival_fit(tv, k, km_seed);

    CurvePredictions pred;
    pred.grid = grid;
    pred.values = Matrix(test.size(), grid.size());
    std::vector<std::size_t> clusters(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      auto row = kmeans_survival_predict(model, test.features.row(i), grid);
      for (std::size_t g = 0; g < grid.size(); ++g) pred.values(i, g) = row[g];
      clusters[i] = kmeans_assign(model, test.features.row(i));
    }
    BenchmarkRow row;
    row.resplit = resplit;
    row.model = "kmeans";
    row.k = k;
    row.c_index = td_c_index(pred, test.times, test.events);
    detail::fill_logrank(row, clusters, k, test);
    rows.push_back(std::move(row));
  }

  return rows;
}

// Full protocol: n_resplits independent resplits, run on parallel workers.
// Every resplit derives its own seeds from the master seed, so the merged
// output is identical regardless of thread count.
inline std::vector<BenchmarkRow> run_benchmark(const RawTable& raw, const BenchmarkOptions& opt) {
  std::size_t n_threads = opt.threads > 0 ? opt.threads : std::thread::hardware_concurrency();
  n_threads = std::max<std::size_t>(1, std::min(n_threads, opt.n_resplits));

  std::vector<std::vector<BenchmarkRow>> results(opt.n_resplits);
  std::vector<std::string> errors(opt.n_resplits);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= opt.n_resplits) return;
      try {
        results[i] = run_resplit(raw, i, opt);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < opt.n_resplits; ++i)
    if (!errors[i].empty())
      throw std::runtime_error("benchmark: resplit " + std::to_string(i) + " failed: " + errors[i]);

  std::vector<BenchmarkRow> merged;
  for (auto& r : results) merged.insert(merged.end(), r.begin(), r.end());
  return merged;
}

}  // namespace survmix
