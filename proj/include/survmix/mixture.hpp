#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "survmix/data.hpp"
#include "survmix/density.hpp"
#include "survmix/gate.hpp"
#include "survmix/km.hpp"
#include "survmix/rng.hpp"

namespace survmix {

// One mixture component: KM survival curve plus its kernel-smoothed density.
struct ClusterExpert {
  StepSurvivalFunction survival;
  SmoothedDensity density;
  std::size_t member_count = 0;
};

struct IterationStat {
  std::size_t iter = 0;
  std::size_t churn_count = 0;  // label changes vs the previous iteration
  double log_likelihood = 0.0;
};

struct RestartSummary {
  std::size_t restart = 0;
  double best_log_likelihood = 0.0;
  std::size_t best_iter = 0;
  std::size_t iters_run = 0;
};

struct FitDiagnostics {
  std::size_t selected_restart = 0;
  std::vector<IterationStat> trace;  // trace of the selected restart
  std::vector<RestartSummary> restarts;
};

// Finite mixture of nonparametric experts gated by multinomial logistic
// regression. Survival prediction is the gate-weighted combination of the
// expert curves; an optional uniform component on [0, V] absorbs outliers.
struct SurvMixModel {
  std::size_t k = 0;
  std::vector<ClusterExpert> experts;
  SoftmaxGate gate;
  double outlier_weight = 0.0;       // tau_0 in [0, 1); 0 disables the component
  double data_region_volume = 0.0;   // V, time-axis length of the data region
  double bandwidth = 0.0;
  double density_floor = kDefaultDensityFloor;
  double time_min = 0.0;
  double time_max = 0.0;
  std::vector<std::string> deviation_flags;
  FitDiagnostics diagnostics;
};

struct Responsibilities {
  Matrix values;  // n x K, rows on the simplex

  std::vector<std::size_t> hard_labels() const {
    std::vector<std::size_t> q(values.rows());
    for (std::size_t i = 0; i < values.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < values.cols(); ++c)
        if (values(i, c) > values(i, best)) best = c;
      q[i] = best + 1;
    }
    return q;
  }
};

struct FitConfig {
  std::size_t k = 2;
  std::size_t max_iters = 100;
  double churn_tol = 0.001;  // stop when changes < churn_tol * n
  std::uint64_t seed = 0;
  std::size_t n_restarts = 5;
  GateConfig gate;
  double density_floor = kDefaultDensityFloor;
  std::size_t min_cluster_size = 0;  // 0 = max(5, n / (10k))
  double bandwidth = 0.0;            // 0 = plug-in estimate
  double outlier_weight = 0.0;
  double data_region_volume = 0.0;   // 0 = max time - min time

  std::size_t resolved_min_cluster_size(std::size_t n) const {
    if (min_cluster_size > 0) return min_cluster_size;
    return std::max<std::size_t>(5, n / (10 * k));
  }
};

// Uniform i.i.d. labels from {1..k}, redrawn until every label occurs (at
// most 100 draws), then patched round-robin over the first k positions.
inline std::vector<std::size_t> init_assignments(std::size_t n, std::size_t k,
                                                 std::uint64_t seed) {
  if (n < k) throw std::invalid_argument("init_assignments: n < k");
  if (k == 0) throw std::invalid_argument("init_assignments: k must be >= 1");
  Rng rng(seed);
  std::vector<std::size_t> labels(n);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<bool> seen(k, false);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<std::size_t>(rng.uniform_int(1, k));
      seen[labels[i] - 1] = true;
    }
    if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) return labels;
  }
  for (std::size_t c = 0; c < k; ++c) labels[c] = c + 1;
  return labels;
}

// f(t|theta)^1(d=1) * S(t|theta)^1(d=0); survival is floored at the density
// floor so logs stay finite when S(t) = 0.
inline double point_likelihood(const ClusterExpert& expert, double t, bool event) {
  if (event) return expert.density(t);
  return std::max(expert.survival.at(t), expert.density.floor);
}

namespace detail {

// Log-space E-step scores: scores(i, k) = log pl_k(t_i, d_i) + log tau_k(x_i).
// Argmax, responsibilities, and the observed log-likelihood all derive from
// this matrix.
inline Matrix mixture_scores(const SurvMixModel& model, const SurvivalDataset& ds) {
  std::size_t n = ds.size(), k = model.k;
  Matrix scores(n, k);
  std::vector<double> logtau;
  for (std::size_t i = 0; i < n; ++i) {
    gate_log_proportions(model.gate, ds.features.row(i), logtau);
    for (std::size_t c = 0; c < k; ++c) {
      double pl = point_likelihood(model.experts[c], ds.times[i], ds.events[i] != 0);
      scores(i, c) = std::log(pl) + logtau[c];
    }
  }
  return scores;
}

inline std::vector<std::size_t> scores_argmax(const Matrix& scores) {
  std::vector<std::size_t> labels(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    labels[i] = best + 1;
  }
  return labels;
}

// best-minus-second-best log score per point; low margin = least confident
inline std::vector<double> scores_margin(const Matrix& scores) {
  std::vector<double> margin(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    double best = -HUGE_VAL, second = -HUGE_VAL;
    for (std::size_t c = 0; c < scores.cols(); ++c) {
      double v = scores(i, c);
      if (v > best) {
        second = best;
        best = v;
      } else if (v > second) {
        second = v;
      }
    }
    margin[i] = scores.cols() > 1 ? best - second : HUGE_VAL;
  }
  return margin;
}

inline double loglik_from_scores(const Matrix& scores, double tau0, double volume) {
  double total = 0.0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    double hi = -HUGE_VAL;
    for (std::size_t c = 0; c < scores.cols(); ++c) hi = std::max(hi, scores(i, c));
    double acc = 0.0;
    for (std::size_t c = 0; c < scores.cols(); ++c) acc += std::exp(scores(i, c) - hi);
    double lse = hi + std::log(acc);
    if (tau0 > 0.0)
      total += std::log(tau0 / volume + (1.0 - tau0) * std::exp(lse));
    else
      total += lse;
  }
  return total;
}

}  // namespace detail

// Hard assignment: q_i = argmax_k pl_k(t_i, d_i) * tau_k(x_i), ties to the
// lowest cluster index. Computed in log space; the transform is monotone so
// the argmax is unchanged.
inline std::vector<std::size_t> e_step(const SurvMixModel& model, const SurvivalDataset& ds) {
  return detail::scores_argmax(detail::mixture_scores(model, ds));
}

// Refills clusters below the size floor with the least-confidently-assigned
// points of the largest clusters. Fully deterministic: donors by largest
// count (ties to lowest cluster index), points by smallest margin (ties to
// lowest row index).
inline std::vector<std::size_t> repair_clusters(std::vector<std::size_t> labels, std::size_t k,
                                                std::size_t min_cluster_size,
                                                const std::vector<double>& margins) {
  std::size_t n = labels.size();
  if (n < k * min_cluster_size)
    throw std::invalid_argument("repair_clusters: n < k * min_cluster_size is infeasible");
  if (margins.size() != n)
    throw std::invalid_argument("repair_clusters: margins/labels length mismatch");

  std::vector<std::size_t> counts(k, 0);
  for (std::size_t label : labels) {
    if (label < 1 || label > k) throw std::invalid_argument("repair_clusters: label out of range");
    ++counts[label - 1];
  }

  for (std::size_t c = 0; c < k; ++c) {
    while (counts[c] < min_cluster_size) {
      std::size_t donor = k;
      for (std::size_t g = 0; g < k; ++g)
        if (g != c && counts[g] > min_cluster_size && (donor == k || counts[g] > counts[donor]))
          donor = g;
      if (donor == k)
        throw std::logic_error("repair_clusters: no donor cluster available");
      std::size_t pick = n;
      for (std::size_t i = 0; i < n; ++i)
        if (labels[i] == donor + 1 && (pick == n || margins[i] < margins[pick])) pick = i;
      labels[pick] = c + 1;
      --counts[donor];
      ++counts[c];
    }
  }
  return labels;
}

// M-step: per-cluster KM survival, kernel-smoothed density with the shared
// fixed bandwidth, and a gate refit on {x_i, q_i}.
inline SurvMixModel m_step(const SurvivalDataset& ds, const std::vector<std::size_t>& labels,
                           std::size_t k, double bandwidth, double density_floor,
                           const GateConfig& gate_config) {
  if (labels.size() != ds.size()) throw std::invalid_argument("m_step: labels length mismatch");
  SurvMixModel model;
  model.k = k;
  model.bandwidth = bandwidth;
  model.density_floor = density_floor;
  model.deviation_flags = {"gate_intercept"};
  for (std::size_t c = 1; c <= k; ++c) {
    std::vector<double> t;
    std::vector<std::uint8_t> d;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (labels[i] == c) {
        t.push_back(ds.times[i]);
        d.push_back(ds.events[i]);
      }
    }
    if (t.empty())
      throw std::invalid_argument("m_step: cluster " + std::to_string(c) +
                                  " is empty; repair clusters first");
    ClusterExpert expert;
    expert.survival = kaplan_meier(t, d);
    expert.density = smoothed_density(expert.survival, bandwidth, density_floor);
    expert.member_count = t.size();
    model.experts.push_back(std::move(expert));
  }
  model.gate = fit_gate(ds.features, labels, k, gate_config);
  if (!ds.times.empty()) {
    auto [lo, hi] = std::minmax_element(ds.times.begin(), ds.times.end());
    model.time_min = *lo;
    model.time_max = *hi;
  }
  model.data_region_volume = model.time_max - model.time_min;
  return model;
}

// Observed-data log-likelihood: sum_n log sum_k tau_k(x_n) pl_k(t_n, d_n),
// plus the uniform outlier term when tau_0 > 0.
inline double observed_log_likelihood(const SurvMixModel& model, const SurvivalDataset& ds) {
  return detail::loglik_from_scores(detail::mixture_scores(model, ds), model.outlier_weight,
                                    model.data_region_volume);
}

// Soft posteriors per point (rows normalized to the simplex).
inline Responsibilities responsibilities(const SurvMixModel& model, const SurvivalDataset& ds) {
  Matrix scores = detail::mixture_scores(model, ds);
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    double hi = -HUGE_VAL;
    for (std::size_t c = 0; c < scores.cols(); ++c) hi = std::max(hi, scores(i, c));
    double acc = 0.0;
    for (std::size_t c = 0; c < scores.cols(); ++c) {
      double e = std::exp(scores(i, c) - hi);
      scores(i, c) = e;
      acc += e;
    }
    for (std::size_t c = 0; c < scores.cols(); ++c) scores(i, c) /= acc;
  }
  return {std::move(scores)};
}

// Uncertainty_n = 1 - max_k r_nk.
inline std::vector<double> cluster_uncertainty(const SurvMixModel& model,
                                               const SurvivalDataset& ds) {
  Responsibilities resp = responsibilities(model, ds);
  std::vector<double> u(resp.values.rows());
  for (std::size_t i = 0; i < resp.values.rows(); ++i) {
    double hi = 0.0;
    for (std::size_t c = 0; c < resp.values.cols(); ++c) hi = std::max(hi, resp.values(i, c));
    u[i] = 1.0 - hi;
  }
  return u;
}

// Mixture survival curve on a non-decreasing grid:
//   S(t|x) = sum_k tau_k(x) S(t|theta_k),
// with the uniform outlier component contributing max(0, 1 - t/V) at weight
// tau_0 when enabled.
inline std::vector<double> predict_survival(const SurvMixModel& model, std::span<const double> x,
                                            std::span<const double> grid) {
  for (std::size_t g = 0; g + 1 < grid.size(); ++g)
    if (grid[g] > grid[g + 1])
      throw std::invalid_argument("predict_survival: grid must be non-decreasing");
  for (double t : grid)
    if (!(t >= 0.0)) throw std::invalid_argument("predict_survival: grid must be non-negative");

  std::vector<double> tau = predict_proportions(model.gate, x);
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (std::size_t c = 0; c < model.k; ++c) s += tau[c] * model.experts[c].survival.at(grid[g]);
    if (model.outlier_weight > 0.0) {
      double outlier_surv = std::max(0.0, 1.0 - grid[g] / model.data_region_volume);
      s = model.outlier_weight * outlier_surv + (1.0 - model.outlier_weight) * s;
    }
    out[g] = s;
  }
  return out;
}

// Label-free cluster assignment: argmax_k tau_k(x), ties to lowest index.
inline std::size_t predict_cluster(const SurvMixModel& model, std::span<const double> x) {
  std::vector<double> tau = predict_proportions(model.gate, x);
  std::size_t best = 0;
  for (std::size_t c = 1; c < tau.size(); ++c)
    if (tau[c] > tau[best]) best = c;
  return best + 1;
}

namespace detail {

struct EmRun {
  SurvMixModel model;
  double best_ll = -HUGE_VAL;
  std::vector<IterationStat> trace;
  std::size_t best_iter = 0;
};

inline EmRun run_em(const SurvivalDataset& ds, const FitConfig& config, double bandwidth,
                    double volume, std::uint64_t seed) {
  std::size_t n = ds.size(), k = config.k;
  std::size_t floor_size = config.resolved_min_cluster_size(n);

  std::vector<std::size_t> labels = init_assignments(n, k, seed);
  labels = repair_clusters(std::move(labels), k, floor_size, std::vector<double>(n, 0.0));

  auto make_model = [&](const std::vector<std::size_t>& q) {
    SurvMixModel m = m_step(ds, q, k, bandwidth, config.density_floor, config.gate);
    m.outlier_weight = config.outlier_weight;
    m.data_region_volume = volume;
    return m;
  };

  EmRun run;
  SurvMixModel model = make_model(labels);
  Matrix scores = mixture_scores(model, ds);
  double ll = loglik_from_scores(scores, config.outlier_weight, volume);
  run.trace.push_back({0, n, ll});
  run.model = model;
  run.best_ll = ll;
  run.best_iter = 0;

  std::vector<std::size_t> prev = labels;
  for (std::size_t iter = 1; iter <= config.max_iters; ++iter) {
    std::vector<std::size_t> next = scores_argmax(scores);
    next = repair_clusters(std::move(next), k, floor_size, scores_margin(scores));
    std::size_t churn = 0;
    for (std::size_t i = 0; i < n; ++i) churn += (next[i] != prev[i]);

    model = make_model(next);
    scores = mixture_scores(model, ds);
    ll = loglik_from_scores(scores, config.outlier_weight, volume);
    run.trace.push_back({iter, churn, ll});
    if (ll > run.best_ll) {
      run.model = model;
      run.best_ll = ll;
      run.best_iter = iter;
    }
    prev = std::move(next);
    if (static_cast<double>(churn) < config.churn_tol * static_cast<double>(n)) break;
  }
  return run;
}

}  // namespace detail

// Full training: fixed plug-in bandwidth, then n_restarts runs of
// init -> (E-step -> repair -> M-step) until assignments stabilize. Each
// run keeps its highest-likelihood state (never worse than its own
// initialization); the best run across restarts wins.
inline SurvMixModel fit(const SurvivalDataset& ds, const FitConfig& config) {
  ds.validate();
  std::size_t n = ds.size();
  if (config.k < 2) throw std::invalid_argument("fit: k must be >= 2");
  if (config.n_restarts < 1) throw std::invalid_argument("fit: n_restarts must be >= 1");
  if (!(config.churn_tol >= 0.0)) throw std::invalid_argument("fit: churn_tol must be >= 0");
  std::size_t floor_size = config.resolved_min_cluster_size(n);
  if (n < config.k * floor_size)
    throw std::invalid_argument("fit: dataset too small for k clusters of min size " +
                                std::to_string(floor_size));
  if (!(config.outlier_weight >= 0.0 && config.outlier_weight < 1.0))
    throw std::invalid_argument("fit: outlier_weight must be in [0, 1)");

  double bandwidth = config.bandwidth;
  if (bandwidth <= 0.0) {
    std::vector<double> uncensored;
    for (std::size_t i = 0; i < n; ++i)
      if (ds.events[i]) uncensored.push_back(ds.times[i]);
    bandwidth = plugin_bandwidth(uncensored);
  }

  auto [lo, hi] = std::minmax_element(ds.times.begin(), ds.times.end());
  double volume = config.data_region_volume > 0.0 ? config.data_region_volume : *hi - *lo;
  if (config.outlier_weight > 0.0 && !(volume > 0.0))
    throw std::invalid_argument("fit: outlier component needs a positive data region volume");

  std::vector<detail::EmRun> runs;
  std::vector<std::string> failures;
  std::vector<std::size_t> run_restart;
  for (std::size_t r = 0; r < config.n_restarts; ++r) {
    try {
      runs.push_back(detail::run_em(ds, config, bandwidth, volume, derive_seed(config.seed, r)));
      run_restart.push_back(r);
    } catch (const std::exception& e) {
      failures.push_back("restart " + std::to_string(r) + ": " + e.what());
    }
  }
  if (runs.empty()) {
    std::string msg = "fit: all restarts failed";
    for (const auto& f : failures) msg += "\n  " + f;
    throw std::runtime_error(msg);
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].best_ll > runs[best].best_ll) best = r;

  SurvMixModel model = std::move(runs[best].model);
  model.time_min = *lo;
  model.time_max = *hi;
  model.diagnostics.selected_restart = run_restart[best];
  model.diagnostics.trace = std::move(runs[best].trace);
  for (std::size_t r = 0; r < runs.size(); ++r)
    model.diagnostics.restarts.push_back({run_restart[r], runs[r].best_ll, runs[r].best_iter,
                                          runs[r].trace.size() - 1});
  return model;
}

inline nlohmann::json model_to_json(const SurvMixModel& model) {
  nlohmann::json experts = nlohmann::json::array();
  for (const auto& e : model.experts) {
    nlohmann::json ej = step_function_to_json(e.survival);
    ej["member_count"] = e.member_count;
    experts.push_back(std::move(ej));
  }
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& s : model.diagnostics.trace)
    trace.push_back({{"iter", s.iter}, {"churn", s.churn_count}, {"log_likelihood", s.log_likelihood}});
  nlohmann::json restarts = nlohmann::json::array();
  for (const auto& r : model.diagnostics.restarts)
    restarts.push_back({{"restart", r.restart},
                        {"best_log_likelihood", r.best_log_likelihood},
                        {"best_iter", r.best_iter},
                        {"iters_run", r.iters_run}});
  return {{"version", 1},
          {"type", "survmixclust"},
          {"k", model.k},
          {"gate", gate_to_json(model.gate)},
          {"experts", experts},
          {"bandwidth", model.bandwidth},
          {"density_floor", model.density_floor},
          {"tau0", model.outlier_weight},
          {"data_region_volume", model.data_region_volume},
          {"time_range", {model.time_min, model.time_max}},
          {"deviation_flags", model.deviation_flags},
          {"diagnostics",
           {{"selected_restart", model.diagnostics.selected_restart},
            {"trace", trace},
            {"restarts", restarts}}}};
}

inline SurvMixModel model_from_json(const nlohmann::json& j) {
  if (j.at("type").get<std::string>() != "survmixclust")
    throw std::runtime_error("model_from_json: not a survmixclust model file");
  SurvMixModel model;
  model.k = j.at("k").get<std::size_t>();
  model.gate = gate_from_json(j.at("gate"));
  model.bandwidth = j.at("bandwidth").get<double>();
  model.density_floor = j.at("density_floor").get<double>();
  model.outlier_weight = j.at("tau0").get<double>();
  model.data_region_volume = j.at("data_region_volume").get<double>();
  model.time_min = j.at("time_range")[0].get<double>();
  model.time_max = j.at("time_range")[1].get<double>();
  model.deviation_flags = j.at("deviation_flags").get<std::vector<std::string>>();
  for (const auto& ej : j.at("experts")) {
    ClusterExpert e;
    e.survival = step_function_from_json(ej);
    e.density = smoothed_density(e.survival, model.bandwidth, model.density_floor);
    e.member_count = ej.at("member_count").get<std::size_t>();
    model.experts.push_back(std::move(e));
  }
  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    model.diagnostics.selected_restart = d.at("selected_restart").get<std::size_t>();
    for (const auto& s : d.at("trace"))
      model.diagnostics.trace.push_back({s.at("iter").get<std::size_t>(),
                                         s.at("churn").get<std::size_t>(),
                                         s.at("log_likelihood").get<double>()});
    for (const auto& r : d.at("restarts"))
      model.diagnostics.restarts.push_back({r.at("restart").get<std::size_t>(),
                                            r.at("best_log_likelihood").get<double>(),
                                            r.at("best_iter").get<std::size_t>(),
                                            r.at("iters_run").get<std::size_t>()});
  }
  return model;
}

}  // namespace survmix
