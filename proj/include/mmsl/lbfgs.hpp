#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace mmsl {

/// Objective callback: returns f(x) and fills grad (same length as x).
using ObjectiveFn =
    std::function<double(const std::vector<double>&, std::vector<double>&)>;

struct MinimizeOptions {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-8;  // on the projected gradient 2-norm
  int history = 8;
};

struct MinimizeResult {
  std::vector<double> x;
  double fx = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void clamp_to_box(std::vector<double>& x, const std::vector<double>& lo,
                         const std::vector<double>& hi) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo[i]) x[i] = lo[i];
    if (x[i] > hi[i]) x[i] = hi[i];
  }
}

/// Gradient with components pointing out of an active bound zeroed;
/// its norm is the stationarity measure on the box.
inline double projected_grad_norm(const std::vector<double>& x,
                                  const std::vector<double>& g,
                                  const std::vector<double>& lo,
                                  const std::vector<double>& hi) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double gi = g[i];
    if (x[i] <= lo[i] && gi > 0.0) gi = 0.0;
    if (x[i] >= hi[i] && gi < 0.0) gi = 0.0;
    s += gi * gi;
  }
  return std::sqrt(s);
}

}  // namespace detail

/// Quasi-Newton (L-BFGS) minimization over a coordinate box. Iterates are
/// projected onto the box after each step and the curvature memory is
/// dropped whenever the projection is active, so boundary optima behave
/// like projected gradient descent. Evaluation counts stay modest: the
/// line search is Armijo backtracking that accepts the unit step first.
inline MinimizeResult minimize_box(const ObjectiveFn& objective,
                                   std::vector<double> x0,
                                   const std::vector<double>& lo,
                                   const std::vector<double>& hi,
                                   const MinimizeOptions& options = {}) {
  const std::size_t n = x0.size();
  const double kInf = std::numeric_limits<double>::infinity();

  detail::clamp_to_box(x0, lo, hi);
  std::vector<double> x = x0, g(n), g_new(n), d(n), x_new(n);
  double fx = objective(x, g);
  if (std::isnan(fx)) fx = kInf;

  std::deque<std::pair<std::vector<double>, std::vector<double>>> memory;  // (s, y)
  MinimizeResult result;
  result.x = x;
  result.fx = fx;
  int stalled = 0;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter;
    if (detail::projected_grad_norm(x, g, lo, hi) < options.gradient_tolerance) break;

    // Two-loop recursion for d = -H g.
    d = g;
    std::vector<double> alpha_coef(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, y] = memory[k];
      const double rho = 1.0 / detail::dot(s, y);
      alpha_coef[k] = rho * detail::dot(s, d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha_coef[k] * y[i];
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      const double gamma = detail::dot(s, y) / detail::dot(y, y);
      for (double& v : d) v *= gamma;
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, y] = memory[k];
      const double rho = 1.0 / detail::dot(s, y);
      const double beta_coef = rho * detail::dot(y, d);
      for (std::size_t i = 0; i < n; ++i) d[i] += (alpha_coef[k] - beta_coef) * s[i];
    }
    for (double& v : d) v = -v;

    double slope = detail::dot(g, d);
    if (!(slope < 0.0)) {  // not a descent direction; fall back to steepest
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      slope = -detail::dot(g, g);
      memory.clear();
      if (!(slope < 0.0)) break;  // zero gradient
    }

    // Armijo backtracking on the projected step.
    const double c1 = 1e-4;
    double t = 1.0;
    double f_new = kInf;
    bool accepted = false;
    bool projected = false;
    for (int ls = 0; ls < 60; ++ls) {
      projected = false;
      for (std::size_t i = 0; i < n; ++i) {
        x_new[i] = x[i] + t * d[i];
        if (x_new[i] < lo[i]) { x_new[i] = lo[i]; projected = true; }
        if (x_new[i] > hi[i]) { x_new[i] = hi[i]; projected = true; }
      }
      f_new = objective(x_new, g_new);
      if (std::isnan(f_new)) f_new = kInf;
      if (f_new <= fx + c1 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // step collapsed; report best point so far

    // Curvature pair from the accepted move.
    std::vector<double> s(n), y(n);
    double step_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
      step_sq += s[i] * s[i];
    }
    const double sy = detail::dot(s, y);
    if (projected) {
      memory.clear();
    } else if (sy > 1e-12 * std::sqrt(step_sq * detail::dot(y, y))) {
      memory.emplace_back(std::move(s), std::move(y));
      if (memory.size() > static_cast<std::size_t>(options.history))
        memory.pop_front();
    }

    // Give up on starts that stop making progress well before the
    // iteration cap; they only ever lose the multi-start reduction.
    if (fx - f_new <= 1e-15 * std::max(1.0, std::fabs(fx)))
      ++stalled;
    else
      stalled = 0;

    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    result.x = x;
    result.fx = fx;
    if (step_sq == 0.0 || stalled >= 2) break;
  }

  // The flag reports the condition at the returned point, whichever
  // path exited the loop.
  result.converged =
      detail::projected_grad_norm(x, g, lo, hi) < options.gradient_tolerance;
  return result;
}

}  // namespace mmsl
