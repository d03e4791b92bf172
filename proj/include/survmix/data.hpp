#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "survmix/csv.hpp"
#include "survmix/matrix.hpp"

namespace survmix {

enum class FeatureKind { continuous, categorical };

struct FeatureColumn {
  std::string name;
  FeatureKind kind;
};

// Maps CSV columns to roles: one time column, one event column, a list of
// typed feature columns.
struct ColumnSchema {
  std::string time_column;
  std::string event_column;
  std::vector<FeatureColumn> feature_columns;

  void validate() const {
    if (time_column.empty() || event_column.empty())
      throw std::invalid_argument("schema: time and event columns are required");
    if (time_column == event_column)
      throw std::invalid_argument("schema: time and event columns must be distinct");
    for (const auto& f : feature_columns) {
      if (f.name == time_column || f.name == event_column)
        throw std::invalid_argument("schema: feature column '" + f.name +
                                    "' collides with a label column");
    }
  }
};

inline ColumnSchema schema_from_json(const nlohmann::json& j) {
  ColumnSchema s;
  s.time_column = j.at("time").get<std::string>();
  s.event_column = j.at("event").get<std::string>();
  for (const auto& f : j.at("features")) {
    std::string kind = f.at("kind").get<std::string>();
    if (kind != "continuous" && kind != "categorical")
      throw std::invalid_argument("schema: unknown feature kind '" + kind + "'");
    s.feature_columns.push_back(
        {f.at("name").get<std::string>(),
         kind == "continuous" ? FeatureKind::continuous : FeatureKind::categorical});
  }
  s.validate();
  return s;
}

inline nlohmann::json schema_to_json(const ColumnSchema& s) {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : s.feature_columns) {
    feats.push_back({{"name", f.name},
                     {"kind", f.kind == FeatureKind::continuous ? "continuous" : "categorical"}});
  }
  return {{"time", s.time_column}, {"event", s.event_column}, {"features", feats}};
}

inline ColumnSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("schema: cannot open file: " + path);
  nlohmann::json j;
  in >> j;
  return schema_from_json(j);
}

// Typed columns parsed from a CSV but not yet imputed/encoded. Missing
// feature entries (empty field or "NA") are nullopt.
struct RawTable {
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<std::vector<std::optional<double>>> continuous;     // per continuous feature
  std::vector<std::vector<std::optional<std::string>>> categorical;  // per categorical feature
  ColumnSchema schema;

  std::size_t size() const { return times.size(); }
};

// Ready-to-model data: encoded features plus (time, event) labels.
struct SurvivalDataset {
  Matrix features;  // n x m, no missing values
  std::vector<double> times;
  std::vector<std::uint8_t> events;  // 1 = event observed, 0 = censored
  std::vector<std::string> feature_names;

  std::size_t size() const { return times.size(); }
  std::size_t n_features() const { return features.cols(); }

  void validate() const {
    if (times.size() != events.size() || times.size() != features.rows())
      throw std::invalid_argument("dataset: times/events/features length mismatch");
    for (double t : times)
      if (!(t >= 0.0) || !std::isfinite(t))
        throw std::invalid_argument("dataset: times must be finite and non-negative");
  }
};

// Fraction of censored rows, sum(1(d_i = 0)) / n.
inline double censoring_rate(const SurvivalDataset& ds) {
  if (ds.size() == 0) return 0.0;
  std::size_t c = 0;
  for (auto d : ds.events) c += (d == 0);
  return static_cast<double>(c) / static_cast<double>(ds.size());
}

inline SurvivalDataset subset(const SurvivalDataset& ds, const std::vector<std::size_t>& idx) {
  SurvivalDataset out;
  out.feature_names = ds.feature_names;
  out.features = Matrix(idx.size(), ds.features.cols());
  out.times.reserve(idx.size());
  out.events.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::size_t i = idx[r];
    for (std::size_t j = 0; j < ds.features.cols(); ++j) out.features(r, j) = ds.features(i, j);
    out.times.push_back(ds.times[i]);
    out.events.push_back(ds.events[i]);
  }
  return out;
}

inline RawTable subset_raw(const RawTable& table, const std::vector<std::size_t>& idx) {
  RawTable out;
  out.schema = table.schema;
  out.continuous.resize(table.continuous.size());
  out.categorical.resize(table.categorical.size());
  for (std::size_t i : idx) {
    out.times.push_back(table.times[i]);
    out.events.push_back(table.events[i]);
    for (std::size_t c = 0; c < table.continuous.size(); ++c)
      out.continuous[c].push_back(table.continuous[c][i]);
    for (std::size_t c = 0; c < table.categorical.size(); ++c)
      out.categorical[c].push_back(table.categorical[c][i]);
  }
  return out;
}

namespace detail {

inline bool is_missing_field(const std::string& s) { return s.empty() || s == "NA"; }

inline std::optional<double> parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

// Parses the CSV at `path` against `schema`. Event values must be one of
// {0, 1, true, false} (case-insensitive); times must be finite and >= 0.
// Extra CSV columns not named by the schema are ignored.
inline RawTable load_csv(const std::string& path, const ColumnSchema& schema) {
  schema.validate();
  CsvTable csv = read_csv(path);

  auto require_column = [&](const std::string& name) {
    if (!csv.has_column(name))
      throw std::runtime_error("load_csv: missing column '" + name + "' in " + path);
    return csv.column_index(name);
  };

  std::size_t time_idx = require_column(schema.time_column);
  std::size_t event_idx = require_column(schema.event_column);
  std::vector<std::size_t> feat_idx;
  for (const auto& f : schema.feature_columns) feat_idx.push_back(require_column(f.name));

  RawTable table;
  table.schema = schema;
  for (const auto& f : schema.feature_columns) {
    if (f.kind == FeatureKind::continuous)
      table.continuous.emplace_back();
    else
      table.categorical.emplace_back();
  }

  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    std::string where = "row " + std::to_string(r + 2);  // header is line 1

    const std::string& ts = row[time_idx];
    auto t = detail::parse_double(ts);
    if (detail::is_missing_field(ts) || !t || !std::isfinite(*t) || *t < 0.0)
      throw std::runtime_error("load_csv: unparsable time value '" + ts + "' at " + where +
                               ", column '" + schema.time_column + "'");

    const std::string& es = row[event_idx];
    std::string el = es;
    std::transform(el.begin(), el.end(), el.begin(), [](unsigned char c) { return std::tolower(c); });
    std::uint8_t ev;
    if (el == "1" || el == "true")
      ev = 1;
    else if (el == "0" || el == "false")
      ev = 0;
    else
      throw std::runtime_error("load_csv: unparsable event value '" + es + "' at " + where +
                               ", column '" + schema.event_column + "'");

    table.times.push_back(*t);
    table.events.push_back(ev);

    std::size_t ci = 0, gi = 0;
    for (std::size_t k = 0; k < schema.feature_columns.size(); ++k) {
      const std::string& field = row[feat_idx[k]];
      if (schema.feature_columns[k].kind == FeatureKind::continuous) {
        if (detail::is_missing_field(field)) {
          table.continuous[ci].push_back(std::nullopt);
        } else {
          auto v = detail::parse_double(field);
          if (!v || !std::isfinite(*v))
            throw std::runtime_error("load_csv: unparsable numeric value '" + field + "' at " +
                                     where + ", column '" + schema.feature_columns[k].name + "'");
          table.continuous[ci].push_back(v);
        }
        ++ci;
      } else {
        if (detail::is_missing_field(field))
          table.categorical[gi].push_back(std::nullopt);
        else
          table.categorical[gi].push_back(field);
        ++gi;
      }
    }
  }
  return table;
}

}  // namespace survmix
