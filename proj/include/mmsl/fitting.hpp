#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <future>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mmsl/errors.hpp"
#include "mmsl/laws.hpp"
#include "mmsl/lbfgs.hpp"
#include "mmsl/records.hpp"

namespace mmsl {

// Free parameters are optimized in log-amplitude form: indices 0..2 hold
// log A, log B and log E (log C for bimodal fits), indices 3..4 hold the
// exponents alpha and beta. Amplitudes are recovered as exponentials, so
// positivity needs no extra constraint.
inline constexpr std::size_t kNumFitParams = 5;
inline constexpr std::size_t kLogA = 0, kLogB = 1, kLogEC = 2, kAlpha = 3, kBeta = 4;

struct InitGrid {
  std::vector<double> log_a;
  std::vector<double> log_b;
  std::vector<double> log_ec;
  std::vector<double> alpha;
  std::vector<double> beta;

  std::size_t size() const {
    return log_a.size() * log_b.size() * log_ec.size() * alpha.size() * beta.size();
  }
};

struct ParamBounds {
  std::array<double, kNumFitParams> lo;
  std::array<double, kNumFitParams> hi;
};

/// Default multi-start grid: the full Cartesian product of
///   log A in {0,5,10,15,20,25}, log B in {0,5,10,15,20,25},
///   log E in {-1,-0.5,0,0.5,1}, alpha and beta in {0,0.5,1,1.5,2},
/// 4500 starts in total. Starts outside the bounds box are clamped onto it.
inline InitGrid default_init_grid() {
  return InitGrid{{0, 5, 10, 15, 20, 25},
                  {0, 5, 10, 15, 20, 25},
                  {-1, -0.5, 0, 0.5, 1},
                  {0, 0.5, 1, 1.5, 2},
                  {0, 0.5, 1, 1.5, 2}};
}

/// Log-amplitudes live in [-5, 30] (keeps every exponential finite);
/// exponents live in [1e-4, 1 - 1e-4], the interior of their (0, 1)
/// domain. Winners that end up pinned to an edge are flagged in the
/// report rather than rejected.
inline ParamBounds default_param_bounds() {
  return ParamBounds{{-5.0, -5.0, -5.0, 1e-4, 1e-4},
                     {30.0, 30.0, 30.0, 1.0 - 1e-4, 1.0 - 1e-4}};
}

struct FitConfig {
  double huber_delta = 0.03;
  InitGrid init_grid = default_init_grid();
  int max_iterations = 1000;
  double gradient_tolerance = 1e-8;
  ParamBounds bounds = default_param_bounds();
};

inline void validate(const FitConfig& config) {
  if (!(config.huber_delta > 0.0)) throw ValidationError("huber_delta must be positive");
  if (config.init_grid.size() == 0) throw ValidationError("init grid must be non-empty per parameter");
  if (config.max_iterations <= 0) throw ValidationError("max_iterations must be positive");
  if (!(config.gradient_tolerance > 0.0)) throw ValidationError("gradient_tolerance must be positive");
  for (std::size_t i = 0; i < kNumFitParams; ++i)
    if (!(config.bounds.lo[i] < config.bounds.hi[i]))
      throw ValidationError("bounds must satisfy lo < hi per parameter");
}

struct FitReport {
  double objective_value = 0.0;
  std::vector<double> residuals;      // log-space, one per run
  std::vector<double> winning_init;   // start that produced the winner
  bool converged = false;
  bool on_grid_boundary = false;
  int n_runs = 0;

  bool operator==(const FitReport&) const = default;
};

namespace fit_detail {

struct UniSample {
  double log_n, log_d, log_loss;
};

struct BiSample {
  double base;  // average of the two fixed unimodal evaluations
  double log_n, log_total, log_loss;
};

inline std::string shared_label(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw ValidationError("no runs to fit");
  for (const auto& r : runs) {
    if (r.labels.size() != 1)
      throw ValidationError("mixed modality labels: run " + r.run_id +
                            " is not single-modality");
    if (r.labels[0] != runs.front().labels[0])
      throw ValidationError("mixed modality labels: run " + r.run_id +
                            " has '" + r.labels[0] + "'");
  }
  return runs.front().labels[0];
}

inline void require_determined(const std::vector<RunRecord>& runs,
                               const std::set<std::uint64_t>& n_values,
                               const std::set<std::uint64_t>& d_values) {
  if (n_values.size() < 2)
    throw ValidationError("underdetermined: need at least 2 distinct model sizes");
  if (d_values.size() < 2)
    throw ValidationError("underdetermined: need at least 2 distinct dataset sizes");
  if (runs.size() < 6)
    throw ValidationError("underdetermined: need at least 6 runs for 5 free parameters");
}

}  // namespace fit_detail

/// Residual model fitted for one modality: for run i,
///   r_i = lse(log A - alpha log N_i, log B - beta log D_i, log E) - log L_i
/// and the objective is the summed Huber penalty of the residuals.
/// Exposed so the analytic gradient can be checked against finite
/// differences independently of the optimizer.
inline ObjectiveFn unimodal_objective(std::vector<fit_detail::UniSample> samples,
                                      double delta) {
  return [samples = std::move(samples), delta](const std::vector<double>& x,
                                               std::vector<double>& grad) {
    grad.assign(kNumFitParams, 0.0);
    double total = 0.0;
    for (const auto& s : samples) {
      const double t1 = x[kLogA] - x[kAlpha] * s.log_n;
      const double t2 = x[kLogB] - x[kBeta] * s.log_d;
      const double t3 = x[kLogEC];
      double m = t1 > t2 ? t1 : t2;
      if (t3 > m) m = t3;
      const double e1 = std::exp(t1 - m);
      const double e2 = std::exp(t2 - m);
      const double e3 = std::exp(t3 - m);
      const double sum = e1 + e2 + e3;
      const double r = m + std::log(sum) - s.log_loss;
      total += huber(delta, r);
      const double dh = huber_derivative(delta, r) / sum;
      const double w1 = dh * e1;
      const double w2 = dh * e2;
      grad[kLogA] += w1;
      grad[kLogB] += w2;
      grad[kLogEC] += dh * e3;
      grad[kAlpha] -= w1 * s.log_n;
      grad[kBeta] -= w2 * s.log_d;
    }
    return total;
  };
}

/// Same residual structure for a pair, with the fixed unimodal average
/// folded into each sample:
///   pred_i = base_i - C + A/N^alpha + B/(D_i + D_j)^beta,
///   r_i = log(pred_i) - log L_i.
/// A candidate that drives pred_i <= 0 collects a flat 1e6 penalty per
/// violated run, which keeps the objective finite and pushes the line
/// search back into the admissible region.
inline ObjectiveFn bimodal_objective(std::vector<fit_detail::BiSample> samples,
                                     double delta) {
  return [samples = std::move(samples), delta](const std::vector<double>& x,
                                               std::vector<double>& grad) {
    grad.assign(kNumFitParams, 0.0);
    double total = 0.0;
    for (const auto& s : samples) {
      const double cap = std::exp(x[kLogA] - x[kAlpha] * s.log_n);
      const double dat = std::exp(x[kLogB] - x[kBeta] * s.log_total);
      const double syn = std::exp(x[kLogEC]);
      const double pred = s.base - syn + cap + dat;
      if (!(pred > 0.0)) {
        total += 1e6;
        continue;
      }
      const double r = std::log(pred) - s.log_loss;
      total += huber(delta, r);
      const double scale = huber_derivative(delta, r) / pred;
      grad[kLogA] += scale * cap;
      grad[kLogB] += scale * dat;
      grad[kLogEC] -= scale * syn;
      grad[kAlpha] -= scale * cap * s.log_n;
      grad[kBeta] -= scale * dat * s.log_total;
    }
    return total;
  };
}

namespace fit_detail {

struct Candidate {
  double fx = std::numeric_limits<double>::infinity();
  std::array<double, kNumFitParams> x{};
  std::array<double, kNumFitParams> init{};
  bool converged = false;
};

/// Strict total order: objective first, then lowest alpha, lowest beta,
/// then the remaining coordinates. Makes the multi-start reduction
/// independent of evaluation order.
inline bool better(const Candidate& a, const Candidate& b) {
  if (a.fx != b.fx) return a.fx < b.fx;
  if (a.x[kAlpha] != b.x[kAlpha]) return a.x[kAlpha] < b.x[kAlpha];
  if (a.x[kBeta] != b.x[kBeta]) return a.x[kBeta] < b.x[kBeta];
  if (a.x[kLogA] != b.x[kLogA]) return a.x[kLogA] < b.x[kLogA];
  if (a.x[kLogB] != b.x[kLogB]) return a.x[kLogB] < b.x[kLogB];
  return a.x[kLogEC] < b.x[kLogEC];
}

inline std::array<double, kNumFitParams> start_for_index(const InitGrid& grid,
                                                         const ParamBounds& bounds,
                                                         std::size_t index) {
  const auto pick = [&](const std::vector<double>& values, std::size_t i,
                        std::size_t param) {
    double v = values[i];
    if (v < bounds.lo[param]) v = bounds.lo[param];
    if (v > bounds.hi[param]) v = bounds.hi[param];
    return v;
  };
  std::array<double, kNumFitParams> start{};
  start[kBeta] = pick(grid.beta, index % grid.beta.size(), kBeta);
  index /= grid.beta.size();
  start[kAlpha] = pick(grid.alpha, index % grid.alpha.size(), kAlpha);
  index /= grid.alpha.size();
  start[kLogEC] = pick(grid.log_ec, index % grid.log_ec.size(), kLogEC);
  index /= grid.log_ec.size();
  start[kLogB] = pick(grid.log_b, index % grid.log_b.size(), kLogB);
  index /= grid.log_b.size();
  start[kLogA] = pick(grid.log_a, index % grid.log_a.size(), kLogA);
  return start;
}

inline Candidate run_multistart(const ObjectiveFn& objective, const FitConfig& config,
                                unsigned threads) {
  // Clamping the grid onto the bounds box collapses some starts onto the
  // same point; minimizing each distinct start once gives the identical
  // reduction result.
  std::vector<std::array<double, kNumFitParams>> starts;
  starts.reserve(config.init_grid.size());
  for (std::size_t idx = 0; idx < config.init_grid.size(); ++idx)
    starts.push_back(start_for_index(config.init_grid, config.bounds, idx));
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

  const std::vector<double> lo(config.bounds.lo.begin(), config.bounds.lo.end());
  const std::vector<double> hi(config.bounds.hi.begin(), config.bounds.hi.end());
  MinimizeOptions options;
  options.max_iterations = config.max_iterations;
  options.gradient_tolerance = config.gradient_tolerance;

  const auto run_range = [&](std::size_t begin, std::size_t end) {
    Candidate best;
    for (std::size_t idx = begin; idx < end; ++idx) {
      const auto& start = starts[idx];
      MinimizeResult res = minimize_box(
          objective, std::vector<double>(start.begin(), start.end()), lo, hi, options);
      Candidate c;
      c.fx = std::isnan(res.fx) ? std::numeric_limits<double>::infinity() : res.fx;
      std::copy(res.x.begin(), res.x.end(), c.x.begin());
      c.init = start;
      c.converged = res.converged;
      if (better(c, best)) best = c;
    }
    return best;
  };

  const std::size_t total = starts.size();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(total));
  if (threads <= 1) return run_range(0, total);

  std::vector<std::future<Candidate>> futures;
  const std::size_t chunk = (total + threads - 1) / threads;
  for (std::size_t begin = 0; begin < total; begin += chunk) {
    const std::size_t end = std::min(total, begin + chunk);
    futures.push_back(std::async(std::launch::async, run_range, begin, end));
  }
  Candidate best;
  for (auto& f : futures) {
    Candidate c = f.get();
    if (better(c, best)) best = c;
  }
  return best;
}

inline bool near_bounds(const std::array<double, kNumFitParams>& x,
                        const ParamBounds& bounds) {
  for (std::size_t i = 0; i < kNumFitParams; ++i) {
    const double span = bounds.hi[i] - bounds.lo[i];
    if (std::fabs(x[i] - bounds.lo[i]) <= 1e-9 * span) return true;
    if (std::fabs(x[i] - bounds.hi[i]) <= 1e-9 * span) return true;
  }
  return false;
}

inline FitReport make_report(const Candidate& best, const FitConfig& config,
                             std::size_t n_runs, const std::vector<double>& residuals) {
  FitReport report;
  report.residuals = residuals;
  report.objective_value = 0.0;
  for (double r : residuals) report.objective_value += huber(config.huber_delta, r);
  report.winning_init.assign(best.init.begin(), best.init.end());
  report.converged = best.converged;
  report.on_grid_boundary = near_bounds(best.x, config.bounds);
  report.n_runs = static_cast<int>(n_runs);
  return report;
}

}  // namespace fit_detail

/// Fit a unimodal law to single-modality runs by minimizing the Huber
/// penalty of log-space residuals from every grid start, keeping the
/// best optimum. Requires at least 6 runs spanning at least 2 distinct
/// model sizes and 2 distinct dataset sizes.
inline std::pair<UnimodalLaw, FitReport> fit_unimodal(
    const std::vector<RunRecord>& runs, const FitConfig& config = {},
    unsigned threads = 0) {
  validate(config);
  for (const auto& r : runs) validate(r);
  const std::string label = fit_detail::shared_label(runs);

  std::set<std::uint64_t> n_values, d_values;
  std::vector<fit_detail::UniSample> samples;
  samples.reserve(runs.size());
  for (const auto& r : runs) {
    const std::uint64_t d = r.tokens_per_dataset.at(label);
    n_values.insert(r.n_params);
    d_values.insert(d);
    samples.push_back({std::log(static_cast<double>(r.n_params)),
                       std::log(static_cast<double>(d)), std::log(r.final_loss)});
  }
  fit_detail::require_determined(runs, n_values, d_values);

  const ObjectiveFn objective = unimodal_objective(samples, config.huber_delta);
  const auto best = fit_detail::run_multistart(objective, config, threads);
  if (!std::isfinite(best.fx))
    throw NumericError("optimizer diverged on every initialization");

  UnimodalLaw law;
  law.modality = label;
  law.A = std::exp(best.x[kLogA]);
  law.B = std::exp(best.x[kLogB]);
  law.E = std::exp(best.x[kLogEC]);
  law.alpha = best.x[kAlpha];
  law.beta = best.x[kBeta];
  validate(law);

  std::vector<double> residuals;
  residuals.reserve(samples.size());
  for (const auto& s : samples) {
    const double l = lse({best.x[kLogA] - law.alpha * s.log_n,
                          best.x[kLogB] - law.beta * s.log_d, best.x[kLogEC]});
    residuals.push_back(l - s.log_loss);
  }
  return {law, fit_detail::make_report(best, config, runs.size(), residuals)};
}

/// Fit the pair-interaction parameters (C, A, B, alpha, beta) of a
/// bimodal law on mixed runs, holding the two already-fitted unimodal
/// laws fixed. The synergy constant is optimized as log C, so C stays
/// positive and can only approach zero.
inline std::pair<BimodalLaw, FitReport> fit_bimodal(
    const std::vector<RunRecord>& runs, const UnimodalLaw& law_i,
    const UnimodalLaw& law_j, const FitConfig& config = {}, unsigned threads = 0) {
  validate(config);
  validate(law_i);
  validate(law_j);
  if (law_i.modality == law_j.modality)
    throw ValidationError("uni-modal law modality mismatch: laws share one modality");
  for (const auto& r : runs) validate(r);
  if (runs.empty()) throw ValidationError("no runs to fit");

  std::set<std::uint64_t> n_values, d_values;
  std::vector<fit_detail::BiSample> samples;
  samples.reserve(runs.size());
  for (const auto& r : runs) {
    if (r.labels.size() != 2)
      throw ValidationError("run " + r.run_id + " is not a two-modality run");
    const bool straight = r.labels[0] == law_i.modality && r.labels[1] == law_j.modality;
    const bool flipped = r.labels[0] == law_j.modality && r.labels[1] == law_i.modality;
    if (!straight && !flipped)
      throw ValidationError("uni-modal law modality mismatch: run " + r.run_id +
                            " carries other labels");
    const double d_i = static_cast<double>(r.tokens_per_dataset.at(law_i.modality));
    const double d_j = static_cast<double>(r.tokens_per_dataset.at(law_j.modality));
    const double n = static_cast<double>(r.n_params);
    const double half = 0.5 * (d_i + d_j);  // equal-subsample convention
    n_values.insert(r.n_params);
    d_values.insert(r.tokens_per_dataset.at(law_i.modality) +
                    r.tokens_per_dataset.at(law_j.modality));
    samples.push_back(
        {0.5 * (eval_unimodal(law_i, n, half) + eval_unimodal(law_j, n, half)),
         std::log(n), std::log(d_i + d_j), std::log(r.final_loss)});
  }
  fit_detail::require_determined(runs, n_values, d_values);

  const ObjectiveFn objective = bimodal_objective(samples, config.huber_delta);
  const auto best = fit_detail::run_multistart(objective, config, threads);
  if (!std::isfinite(best.fx) || best.fx >= 1e6)
    throw NumericError("optimizer diverged on every initialization");

  BimodalLaw law;
  law.modality_i = law_i.modality;
  law.modality_j = law_j.modality;
  law.law_i = law_i;
  law.law_j = law_j;
  law.C = std::exp(best.x[kLogEC]);
  law.A = std::exp(best.x[kLogA]);
  law.B = std::exp(best.x[kLogB]);
  law.alpha = best.x[kAlpha];
  law.beta = best.x[kBeta];
  validate(law);

  std::vector<double> residuals;
  residuals.reserve(samples.size());
  for (const auto& s : samples) {
    const double pred = s.base - law.C +
                        std::exp(best.x[kLogA] - law.alpha * s.log_n) +
                        std::exp(best.x[kLogB] - law.beta * s.log_total);
    residuals.push_back(std::log(pred) - s.log_loss);
  }
  return {law, fit_detail::make_report(best, config, runs.size(), residuals)};
}

}  // namespace mmsl
