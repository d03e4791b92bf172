#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "survmix/data.hpp"

namespace survmix {

// Fitted preprocessing constants: imputation values, standardization
// constants for continuous columns, ordered category lists for one-hot
// expansion. Zero-variance continuous columns are dropped and recorded.
struct PreprocessRecipe {
  struct Continuous {
    std::string name;
    double impute_mean = 0.0;
    double center = 0.0;
    double scale = 1.0;  // > 0
  };
  struct Categorical {
    std::string name;
    std::string impute_mode;
    std::vector<std::string> categories;  // order fixes the one-hot layout
  };

  // Entries appear in schema feature order; dropped columns only in `dropped`.
  std::vector<Continuous> continuous;
  std::vector<Categorical> categorical;
  std::vector<std::string> dropped;

  std::vector<std::string> encoded_feature_names(const ColumnSchema& schema) const;
};

inline nlohmann::json recipe_to_json(const PreprocessRecipe& r) {
  nlohmann::json cont = nlohmann::json::array();
  for (const auto& c : r.continuous)
    cont.push_back({{"name", c.name},
                    {"impute_mean", c.impute_mean},
                    {"center", c.center},
                    {"scale", c.scale}});
  nlohmann::json cat = nlohmann::json::array();
  for (const auto& c : r.categorical)
    cat.push_back({{"name", c.name}, {"impute_mode", c.impute_mode}, {"categories", c.categories}});
  return {{"continuous", cont}, {"categorical", cat}, {"dropped", r.dropped}};
}

inline PreprocessRecipe recipe_from_json(const nlohmann::json& j) {
  PreprocessRecipe r;
  for (const auto& c : j.at("continuous"))
    r.continuous.push_back({c.at("name").get<std::string>(), c.at("impute_mean").get<double>(),
                            c.at("center").get<double>(), c.at("scale").get<double>()});
  for (const auto& c : j.at("categorical"))
    r.categorical.push_back({c.at("name").get<std::string>(),
                             c.at("impute_mode").get<std::string>(),
                             c.at("categories").get<std::vector<std::string>>()});
  r.dropped = j.at("dropped").get<std::vector<std::string>>();
  return r;
}

// Captures imputation means/modes, standardization constants, and category
// lists from `table` only. Continuous columns with no variance after
// imputation are dropped.
inline PreprocessRecipe fit_preprocess(const RawTable& table) {
  if (table.size() == 0) throw std::invalid_argument("fit_preprocess: empty table");
  PreprocessRecipe recipe;

  std::size_t ci = 0, gi = 0;
  for (const auto& col : table.schema.feature_columns) {
    if (col.kind == FeatureKind::continuous) {
      const auto& values = table.continuous[ci++];
      double sum = 0.0;
      std::size_t n_present = 0;
      for (const auto& v : values)
        if (v) {
          sum += *v;
          ++n_present;
        }
      if (n_present == 0)
        throw std::invalid_argument("fit_preprocess: column '" + col.name + "' is all-missing");
      double mean = sum / static_cast<double>(n_present);

      // standardization constants over the imputed column; imputing with the
      // mean leaves the mean unchanged
      double ss = 0.0;
      for (const auto& v : values) {
        double x = v ? *v : mean;
        ss += (x - mean) * (x - mean);
      }
      std::size_t n = values.size();
      double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      if (!(sd > 0.0) || !std::isfinite(sd)) {
        recipe.dropped.push_back(col.name);
      } else {
        recipe.continuous.push_back({col.name, mean, mean, sd});
      }
    } else {
      const auto& values = table.categorical[gi++];
      std::map<std::string, std::size_t> counts;
      for (const auto& v : values)
        if (v) ++counts[*v];
      if (counts.empty())
        throw std::invalid_argument("fit_preprocess: column '" + col.name + "' is all-missing");
      if (counts.size() > 1000)
        throw std::invalid_argument("fit_preprocess: column '" + col.name + "' has " +
                                    std::to_string(counts.size()) +
                                    " distinct levels; misdeclared as categorical?");
      // mode; ties resolved to the lexicographically smallest level
      std::string mode;
      std::size_t best = 0;
      std::vector<std::string> categories;
      for (const auto& [level, count] : counts) {
        categories.push_back(level);
        if (count > best) {
          best = count;
          mode = level;
        }
      }
      recipe.categorical.push_back({col.name, mode, categories});
    }
  }
  return recipe;
}

inline std::vector<std::string> PreprocessRecipe::encoded_feature_names(
    const ColumnSchema& schema) const {
  std::vector<std::string> names;
  std::size_t ci = 0, gi = 0;
  for (const auto& col : schema.feature_columns) {
    if (col.kind == FeatureKind::continuous) {
      if (ci < continuous.size() && continuous[ci].name == col.name) {
        names.push_back(col.name);
        ++ci;
      }
      // otherwise dropped
    } else {
      for (const auto& cat : categorical[gi].categories) names.push_back(col.name + "=" + cat);
      ++gi;
    }
  }
  return names;
}

// Imputes, standardizes, and one-hot encodes `table` with the fitted
// constants in `recipe`. An unseen categorical level maps to an all-zero
// block. Labels are copied unchanged.
inline SurvivalDataset apply_preprocess(const RawTable& table, const PreprocessRecipe& recipe) {
  SurvivalDataset ds;
  ds.times = table.times;
  ds.events = table.events;
  ds.feature_names = recipe.encoded_feature_names(table.schema);

  std::size_t n = table.size();
  ds.features = Matrix(n, ds.feature_names.size());

  std::size_t out_col = 0;
  std::size_t ci_table = 0, gi_table = 0;
  std::size_t ci_recipe = 0, gi_recipe = 0;
  for (const auto& col : table.schema.feature_columns) {
    if (col.kind == FeatureKind::continuous) {
      const auto& values = table.continuous[ci_table++];
      bool kept = ci_recipe < recipe.continuous.size() && recipe.continuous[ci_recipe].name == col.name;
      if (!kept) continue;  // dropped at fit time
      const auto& c = recipe.continuous[ci_recipe++];
      for (std::size_t i = 0; i < n; ++i) {
        double x = values[i] ? *values[i] : c.impute_mean;
        ds.features(i, out_col) = (x - c.center) / c.scale;
      }
      ++out_col;
    } else {
      const auto& values = table.categorical[gi_table++];
      if (gi_recipe >= recipe.categorical.size() || recipe.categorical[gi_recipe].name != col.name)
        throw std::invalid_argument("apply_preprocess: schema does not match recipe at column '" +
                                    col.name + "'");
      const auto& c = recipe.categorical[gi_recipe++];
      for (std::size_t i = 0; i < n; ++i) {
        const std::string& level = values[i] ? *values[i] : c.impute_mode;
        for (std::size_t k = 0; k < c.categories.size(); ++k)
          ds.features(i, out_col + k) = (c.categories[k] == level) ? 1.0 : 0.0;
      }
      out_col += c.categories.size();
    }
  }
  ds.validate();
  return ds;
}

}  // namespace survmix
