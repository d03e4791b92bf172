#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "survmix/csv.hpp"
#include "survmix/data.hpp"
#include "survmix/rng.hpp"

namespace survmix {

// Synthetic survival data with known cluster structure. Censoring is drawn
// independently of the event time (random censoring): t = min(T*, C*),
// d = 1(T* <= C*).
struct SynthSpec {
  struct TimeDist {
    enum class Kind { exponential, weibull } kind = Kind::exponential;
    double rate = 1.0;           // exponential
    double shape = 1.0, scale = 1.0;  // weibull
  };
  struct Cluster {
    double weight = 1.0;
    std::vector<double> center;
    double spread = 1.0;  // isotropic Gaussian std dev
    TimeDist time;
  };
  struct Censoring {
    enum class Kind { none, exponential, cutoff } kind = Censoring::Kind::none;
    double rate = 1.0;    // exponential
    double cutoff = 0.0;  // administrative cutoff time
  };

  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<Cluster> clusters;
  Censoring censoring;

  void validate() const {
    if (n == 0) throw std::invalid_argument("synth: n must be positive");
    if (clusters.empty()) throw std::invalid_argument("synth: need at least one cluster");
    double wsum = 0.0;
    std::size_t dim = clusters.front().center.size();
    for (const auto& c : clusters) {
      if (c.weight < 0.0) throw std::invalid_argument("synth: weights must be non-negative");
      wsum += c.weight;
      if (c.center.size() != dim)
        throw std::invalid_argument("synth: cluster centers must share a dimension");
      if (!(c.spread >= 0.0)) throw std::invalid_argument("synth: spread must be >= 0");
      if (c.time.kind == TimeDist::Kind::exponential && !(c.time.rate > 0.0))
        throw std::invalid_argument("synth: exponential rate must be > 0");
      if (c.time.kind == TimeDist::Kind::weibull && (!(c.time.shape > 0.0) || !(c.time.scale > 0.0)))
        throw std::invalid_argument("synth: weibull shape/scale must be > 0");
    }
    if (!(wsum > 0.0)) throw std::invalid_argument("synth: weights must sum to > 0");
    if (censoring.kind == Censoring::Kind::exponential && !(censoring.rate > 0.0))
      throw std::invalid_argument("synth: censoring rate must be > 0");
    if (censoring.kind == Censoring::Kind::cutoff && censoring.cutoff < 0.0)
      throw std::invalid_argument("synth: cutoff must be >= 0");
  }
};

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec spec;
  spec.n = j.at("n").get<std::size_t>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& cj : j.at("clusters")) {
    SynthSpec::Cluster c;
    c.weight = cj.at("weight").get<double>();
    c.center = cj.at("center").get<std::vector<double>>();
    c.spread = cj.at("spread").get<double>();
    const auto& tj = cj.at("time");
    std::string dist = tj.at("dist").get<std::string>();
    if (dist == "exponential") {
      c.time.kind = SynthSpec::TimeDist::Kind::exponential;
      c.time.rate = tj.at("rate").get<double>();
    } else if (dist == "weibull") {
      c.time.kind = SynthSpec::TimeDist::Kind::weibull;
      c.time.shape = tj.at("shape").get<double>();
      c.time.scale = tj.at("scale").get<double>();
    } else {
      throw std::invalid_argument("synth: unknown time distribution '" + dist + "'");
    }
    spec.clusters.push_back(std::move(c));
  }
  if (j.contains("censoring")) {
    const auto& sj = j.at("censoring");
    std::string kind = sj.at("type").get<std::string>();
    if (kind == "exponential") {
      spec.censoring.kind = SynthSpec::Censoring::Kind::exponential;
      spec.censoring.rate = sj.at("rate").get<double>();
    } else if (kind == "cutoff") {
      spec.censoring.kind = SynthSpec::Censoring::Kind::cutoff;
      spec.censoring.cutoff = sj.at("time").get<double>();
    } else if (kind == "none") {
      spec.censoring.kind = SynthSpec::Censoring::Kind::none;
    } else {
      throw std::invalid_argument("synth: unknown censoring type '" + kind + "'");
    }
  }
  spec.validate();
  return spec;
}

struct SynthData {
  SurvivalDataset dataset;       // raw (unstandardized) features
  std::vector<std::size_t> true_labels;  // 1-based generating cluster
};

inline SynthData generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::size_t dim = spec.clusters.front().center.size();

  double wsum = 0.0;
  for (const auto& c : spec.clusters) wsum += c.weight;

  SynthData out;
  out.dataset.features = Matrix(spec.n, dim);
  for (std::size_t j = 0; j < dim; ++j)
    out.dataset.feature_names.push_back("f" + std::to_string(j + 1));

  for (std::size_t i = 0; i < spec.n; ++i) {
    double r = rng.uniform() * wsum, acc = 0.0;
    std::size_t z = spec.clusters.size() - 1;
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
      acc += spec.clusters[c].weight;
      if (r < acc) {
        z = c;
        break;
      }
    }
    const auto& cl = spec.clusters[z];
    out.true_labels.push_back(z + 1);
    for (std::size_t j = 0; j < dim; ++j)
      out.dataset.features(i, j) = cl.center[j] + cl.spread * rng.normal();

    double event_time;
    if (cl.time.kind == SynthSpec::TimeDist::Kind::exponential)
      event_time = rng.exponential(cl.time.rate);
    else
      event_time = cl.time.scale * std::pow(-std::log(1.0 - rng.uniform()), 1.0 / cl.time.shape);

    double censor_time = HUGE_VAL;
    if (spec.censoring.kind == SynthSpec::Censoring::Kind::exponential)
      censor_time = rng.exponential(spec.censoring.rate);
    else if (spec.censoring.kind == SynthSpec::Censoring::Kind::cutoff)
      censor_time = spec.censoring.cutoff;

    out.dataset.times.push_back(std::min(event_time, censor_time));
    out.dataset.events.push_back(event_time <= censor_time ? 1 : 0);
  }
  return out;
}

// Same CSV layout `load_csv` ingests, plus a trailing truth-label column.
inline void write_synth_csv(const std::string& path, const SynthData& data) {
  CsvTable table;
  table.header = data.dataset.feature_names;
  table.header.push_back("time");
  table.header.push_back("event");
  table.header.push_back("true_cluster");
  char buf[64];
  for (std::size_t i = 0; i < data.dataset.size(); ++i) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < data.dataset.n_features(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.dataset.features(i, j));
      row.emplace_back(buf);
    }
    std::snprintf(buf, sizeof buf, "%.17g", data.dataset.times[i]);
    row.emplace_back(buf);
    row.emplace_back(data.dataset.events[i] ? "1" : "0");
    row.emplace_back(std::to_string(data.true_labels[i]));
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

inline ColumnSchema synth_schema(const SynthData& data) {
  ColumnSchema schema;
  schema.time_column = "time";
  schema.event_column = "event";
  for (const auto& name : data.dataset.feature_names)
    schema.feature_columns.push_back({name, FeatureKind::continuous});
  return schema;
}

}  // namespace survmix
