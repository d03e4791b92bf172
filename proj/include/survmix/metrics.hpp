#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "survmix/matrix.hpp"

namespace survmix {

// Per-subject survival curves on one shared non-decreasing grid.
struct CurvePredictions {
  std::vector<double> grid;
  Matrix values;  // n x G, rows non-increasing in [0, 1]

  // previous-value (step) interpolation, clamped to the first grid value
  double at(std::size_t subject, double t) const {
    auto it = std::upper_bound(grid.begin(), grid.end(), t);
    std::size_t g = it == grid.begin() ? 0 : static_cast<std::size_t>(it - grid.begin()) - 1;
    return values(subject, g);
  }
};

// Time-dependent concordance index. Comparable ordered pairs (i, j):
// t_i < t_j with d_i = 1, or t_i = t_j with d_i = 1 and d_j = 0. A pair is
// concordant when S_i(t_i) < S_j(t_i), curves evaluated at the earlier event
// time; ties in the curve values count 1/2.
inline double td_c_index(const CurvePredictions& pred, const std::vector<double>& times,
                         const std::vector<std::uint8_t>& events) {
  std::size_t n = times.size();
  if (events.size() != n || pred.values.rows() != n)
    throw std::invalid_argument("td_c_index: input length mismatch");
  if (n < 2) throw std::invalid_argument("td_c_index: need at least two subjects");

  // grid lookup for each subject's own time, reused across its comparisons
  std::vector<std::size_t> gidx(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = std::upper_bound(pred.grid.begin(), pred.grid.end(), times[i]);
    gidx[i] = it == pred.grid.begin() ? 0 : static_cast<std::size_t>(it - pred.grid.begin()) - 1;
  }

  double concordant = 0.0;
  std::size_t comparable = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!events[i]) continue;
    double si = pred.values(i, gidx[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      bool cmp = times[j] > times[i] || (times[j] == times[i] && !events[j]);
      if (!cmp) continue;
      ++comparable;
      double sj = pred.values(j, gidx[i]);
      if (si < sj)
        concordant += 1.0;
      else if (si == sj)
        concordant += 0.5;
    }
  }
  if (comparable == 0)
    throw std::invalid_argument("td_c_index: no comparable pairs; metric undefined");
  return concordant / static_cast<double>(comparable);
}

struct LogrankResult {
  double statistic = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
};

namespace detail {

// Regularized upper incomplete gamma Q(a, x), series/continued-fraction form.
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("gamma_q: invalid arguments");
  if (x == 0.0) return 1.0;
  const double eps = 1e-15;
  const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    // series for P(a, x)
    double term = 1.0 / a, sum = term;
    for (int k = 1; k < 10000; ++k) {
      term *= x / (a + k);
      sum += term;
      if (std::abs(term) < std::abs(sum) * eps) break;
    }
    return 1.0 - sum * std::exp(log_prefix);
  }
  // Lentz continued fraction for Q(a, x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return h * std::exp(log_prefix);
}

// solve A x = b in place, partial pivoting; A is small and symmetric PSD here
inline std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
  std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (std::abs(a(pivot, col)) < 1e-300)
      throw std::runtime_error("logrank_test: singular covariance matrix");
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = a(r, col) / a(col, col);
      for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t j = i + 1; j < n; ++j) acc -= a(i, j) * x[j];
    x[i] = acc / a(i, i);
  }
  return x;
}

}  // namespace detail

inline double chi_square_upper_tail(double x, std::size_t df) {
  if (x <= 0.0) return 1.0;
  return detail::gamma_q(static_cast<double>(df) / 2.0, x / 2.0);
}

// K-sample log-rank test. Group labels are 1-based; every group in 1..G must
// be non-empty. At each distinct event time, observed events per group are
// compared against their expectation under the pooled risk set; the
// chi-square statistic uses the hypergeometric variance estimate with G-1
// degrees of freedom.
inline LogrankResult logrank_test(const std::vector<std::size_t>& groups,
                                  const std::vector<double>& times,
                                  const std::vector<std::uint8_t>& events) {
  std::size_t n = times.size();
  if (groups.size() != n || events.size() != n)
    throw std::invalid_argument("logrank_test: input length mismatch");
  std::size_t g_count = 0;
  for (std::size_t g : groups) {
    if (g < 1) throw std::invalid_argument("logrank_test: group labels are 1-based");
    g_count = std::max(g_count, g);
  }
  std::vector<std::size_t> sizes(g_count, 0);
  for (std::size_t g : groups) ++sizes[g - 1];
  if (g_count < 2 || std::any_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 0; }))
    throw std::invalid_argument("logrank_test: need >= 2 non-empty groups");
  if (std::none_of(events.begin(), events.end(), [](std::uint8_t d) { return d != 0; }))
    throw std::invalid_argument("logrank_test: need at least one event");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  std::vector<double> at_risk(g_count, 0.0);
  for (std::size_t g : groups) at_risk[g - 1] += 1.0;

  std::vector<double> observed(g_count, 0.0), expected(g_count, 0.0);
  Matrix cov(g_count, g_count);

  std::size_t i = 0;
  while (i < n) {
    double u = times[order[i]];
    std::vector<double> deaths(g_count, 0.0);
    double d_total = 0.0, removed_total = 0.0;
    std::vector<double> removed(g_count, 0.0);
    while (i < n && times[order[i]] == u) {
      std::size_t idx = order[i];
      if (events[idx]) {
        deaths[groups[idx] - 1] += 1.0;
        d_total += 1.0;
      }
      removed[groups[idx] - 1] += 1.0;
      removed_total += 1.0;
      ++i;
    }
    double n_total = std::accumulate(at_risk.begin(), at_risk.end(), 0.0);
    if (d_total > 0.0 && n_total > 0.0) {
      for (std::size_t g = 0; g < g_count; ++g) {
        observed[g] += deaths[g];
        expected[g] += d_total * at_risk[g] / n_total;
      }
      if (n_total > 1.0) {
        double c = d_total * (n_total - d_total) / (n_total - 1.0);
        for (std::size_t a = 0; a < g_count; ++a)
          for (std::size_t b = 0; b < g_count; ++b) {
            double delta = a == b ? 1.0 : 0.0;
            cov(a, b) += c * (delta * at_risk[a] / n_total -
                              at_risk[a] * at_risk[b] / (n_total * n_total));
          }
      }
    }
    for (std::size_t g = 0; g < g_count; ++g) at_risk[g] -= removed[g];
  }

  // quadratic form over the first G-1 coordinates
  std::size_t m = g_count - 1;
  std::vector<double> u_vec(m);
  Matrix v(m, m);
  for (std::size_t a = 0; a < m; ++a) {
    u_vec[a] = observed[a] - expected[a];
    for (std::size_t b = 0; b < m; ++b) v(a, b) = cov(a, b);
  }
  std::vector<double> x = detail::solve_linear(v, u_vec);
  double stat = std::inner_product(u_vec.begin(), u_vec.end(), x.begin(), 0.0);
  stat = std::max(stat, 0.0);
  return {stat, m, chi_square_upper_tail(stat, m)};
}

}  // namespace survmix
