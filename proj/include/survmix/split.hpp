#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "survmix/data.hpp"
#include "survmix/rng.hpp"

namespace survmix {

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

struct SplitDatasets {
  SurvivalDataset train, val, test;
  SplitIndices indices;
};

// Splits the censored and uncensored subpopulations independently at the
// given fractions. Counts are rounded to nearest; remainders go to train.
// Indices within each part are emitted in ascending order.
inline SplitIndices stratified_split_indices(const std::vector<std::uint8_t>& events,
                                             double f_train, double f_val, double f_test,
                                             std::uint64_t seed) {
  if (!(f_train > 0.0 && f_val > 0.0 && f_test > 0.0))
    throw std::invalid_argument("stratified_split: fractions must be positive");
  if (std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
    throw std::invalid_argument("stratified_split: fractions must sum to 1");

  std::vector<std::size_t> censored, uncensored;
  for (std::size_t i = 0; i < events.size(); ++i)
    (events[i] == 0 ? censored : uncensored).push_back(i);

  Rng rng(seed);
  SplitIndices out;
  auto deal = [&](std::vector<std::size_t>& pool) {
    rng.shuffle(pool);
    auto s = static_cast<double>(pool.size());
    auto n_val = static_cast<std::size_t>(std::llround(s * f_val));
    auto n_test = static_cast<std::size_t>(std::llround(s * f_test));
    if (n_val + n_test > pool.size()) n_test = pool.size() - n_val;
    std::size_t n_train = pool.size() - n_val - n_test;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (i < n_train)
        out.train.push_back(pool[i]);
      else if (i < n_train + n_val)
        out.val.push_back(pool[i]);
      else
        out.test.push_back(pool[i]);
    }
  };
  // an all-censored or all-uncensored dataset degenerates to a plain split
  deal(censored);
  deal(uncensored);

  if (out.train.empty() || out.val.empty() || out.test.empty())
    throw std::invalid_argument("stratified_split: dataset too small to give each part a row");

  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline SplitDatasets stratified_split(const SurvivalDataset& ds, double f_train, double f_val,
                                      double f_test, std::uint64_t seed) {
  SplitDatasets out;
  out.indices = stratified_split_indices(ds.events, f_train, f_val, f_test, seed);
  out.train = subset(ds, out.indices.train);
  out.val = subset(ds, out.indices.val);
  out.test = subset(ds, out.indices.test);
  return out;
}

}  // namespace survmix
