#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "survmix/matrix.hpp"

namespace survmix {

struct GateConfig {
  double l2_penalty = 1e-4;
  std::size_t max_iters = 500;
  double tol = 1e-6;  // on the gradient max-norm
};

// Multinomial logistic regression mapping features to mixing proportions.
// One coefficient row per cluster; the last column is an unpenalized
// intercept (recorded as a deviation flag in model metadata).
struct SoftmaxGate {
  Matrix coefficients;  // K x (m+1)
  double l2_penalty = 0.0;

  std::size_t n_clusters() const { return coefficients.rows(); }
  std::size_t n_features() const { return coefficients.cols() - 1; }
};

namespace detail {

// log-softmax of the K linear scores at x, with max-subtraction
inline void gate_log_proportions(const SoftmaxGate& gate, std::span<const double> x,
                                 std::vector<double>& out) {
  std::size_t k = gate.n_clusters(), m = gate.n_features();
  if (x.size() != m) throw std::invalid_argument("gate: feature vector has wrong length");
  out.resize(k);
  double hi = -HUGE_VAL;
  for (std::size_t c = 0; c < k; ++c) {
    double s = gate.coefficients(c, m);  // intercept
    for (std::size_t j = 0; j < m; ++j) s += gate.coefficients(c, j) * x[j];
    out[c] = s;
    hi = std::max(hi, s);
  }
  double lse = 0.0;
  for (std::size_t c = 0; c < k; ++c) lse += std::exp(out[c] - hi);
  lse = hi + std::log(lse);
  for (std::size_t c = 0; c < k; ++c) out[c] -= lse;
}

}  // namespace detail

inline std::vector<double> predict_log_proportions(const SoftmaxGate& gate,
                                                   std::span<const double> x) {
  std::vector<double> out;
  detail::gate_log_proportions(gate, x, out);
  return out;
}

// Mixing proportions tau_k(x): a point on the K-simplex.
inline std::vector<double> predict_proportions(const SoftmaxGate& gate,
                                               std::span<const double> x) {
  std::vector<double> out = predict_log_proportions(gate, x);
  for (double& v : out) v = std::exp(v);
  return out;
}

// Mean multinomial cross-entropy plus (l2/2)*||B||^2 over non-intercept
// coefficients. Labels are 1-based.
inline double gate_loss(const Matrix& coeff, const Matrix& features,
                        const std::vector<std::size_t>& labels, double l2) {
  std::size_t n = features.rows(), m = features.cols(), k = coeff.rows();
  SoftmaxGate g{coeff, l2};
  std::vector<double> logp;
  double nll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    detail::gate_log_proportions(g, features.row(i), logp);
    nll -= logp[labels[i] - 1];
  }
  nll /= static_cast<double>(n);
  double reg = 0.0;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < m; ++j) reg += coeff(c, j) * coeff(c, j);
  return nll + 0.5 * l2 * reg;
}

inline Matrix gate_gradient(const Matrix& coeff, const Matrix& features,
                            const std::vector<std::size_t>& labels, double l2) {
  std::size_t n = features.rows(), m = features.cols(), k = coeff.rows();
  Matrix grad(k, m + 1);
  SoftmaxGate g{coeff, l2};
  std::vector<double> logp;
  for (std::size_t i = 0; i < n; ++i) {
    detail::gate_log_proportions(g, features.row(i), logp);
    for (std::size_t c = 0; c < k; ++c) {
      double resid = std::exp(logp[c]) - (labels[i] == c + 1 ? 1.0 : 0.0);
      for (std::size_t j = 0; j < m; ++j) grad(c, j) += resid * features(i, j);
      grad(c, m) += resid;
    }
  }
  for (auto& v : grad.data()) v /= static_cast<double>(n);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < m; ++j) grad(c, j) += l2 * coeff(c, j);
  return grad;
}

// Fits the gate on hard labels {1..K} by full-batch gradient descent with
// backtracking line search (Armijo), initialized at zero. The objective is
// convex, so the result is optimizer-independent up to tol. Every label in
// 1..K must occur at least once.
inline SoftmaxGate fit_gate(const Matrix& features, const std::vector<std::size_t>& labels,
                            std::size_t k, const GateConfig& config = {}) {
  std::size_t n = features.rows(), m = features.cols();
  if (labels.size() != n) throw std::invalid_argument("fit_gate: labels/features length mismatch");
  if (n < k) throw std::invalid_argument("fit_gate: need at least one row per cluster");
  std::vector<bool> seen(k, false);
  for (std::size_t label : labels) {
    if (label < 1 || label > k)
      throw std::invalid_argument("fit_gate: label " + std::to_string(label) + " out of range");
    seen[label - 1] = true;
  }
  for (std::size_t c = 0; c < k; ++c)
    if (!seen[c])
      throw std::invalid_argument("fit_gate: cluster " + std::to_string(c + 1) +
                                  " has no training rows; repair clusters first");

  Matrix coeff(k, m + 1);
  double loss = gate_loss(coeff, features, labels, config.l2_penalty);
  double step = 1.0;
  for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
    Matrix grad = gate_gradient(coeff, features, labels, config.l2_penalty);
    double gmax = 0.0, gsq = 0.0;
    for (double v : grad.data()) {
      gmax = std::max(gmax, std::abs(v));
      gsq += v * v;
    }
    if (gmax < config.tol) break;

    step = std::min(step * 2.0, 1e6);
    Matrix trial = coeff;
    double trial_loss;
    for (;;) {
      for (std::size_t idx = 0; idx < trial.data().size(); ++idx)
        trial.data()[idx] = coeff.data()[idx] - step * grad.data()[idx];
      trial_loss = gate_loss(trial, features, labels, config.l2_penalty);
      if (trial_loss <= loss - 1e-4 * step * gsq || step < 1e-16) break;
      step *= 0.5;
    }
    if (trial_loss >= loss) break;  // no further monotone progress
    coeff = std::move(trial);
    loss = trial_loss;
  }
  return {std::move(coeff), config.l2_penalty};
}

inline nlohmann::json gate_to_json(const SoftmaxGate& gate) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t c = 0; c < gate.coefficients.rows(); ++c) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < gate.coefficients.cols(); ++j) row.push_back(gate.coefficients(c, j));
    rows.push_back(std::move(row));
  }
  return {{"n_features", gate.n_features()}, {"coefficients", rows}, {"l2_penalty", gate.l2_penalty}};
}

inline SoftmaxGate gate_from_json(const nlohmann::json& j) {
  auto rows = j.at("coefficients");
  std::size_t k = rows.size();
  std::size_t cols = j.at("n_features").get<std::size_t>() + 1;
  Matrix coeff(k, cols);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t jj = 0; jj < cols; ++jj) coeff(c, jj) = rows[c][jj].get<double>();
  return {std::move(coeff), j.at("l2_penalty").get<double>()};
}

}  // namespace survmix
