#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmsl/errors.hpp"
#include "mmsl/laws.hpp"
#include "mmsl/records.hpp"

namespace mmsl {

/// Fraction of post-warmup training where a modality's smoothed loss
/// stopped decreasing, with the maximal flat stretches as step ranges.
struct FlatnessResult {
  double flat_fraction = 0.0;
  std::vector<std::pair<std::int64_t, std::int64_t>> segments;  // [start_step, end_step]
  std::int64_t warmup_steps_excluded = 0;
};

struct SpikeResult {
  std::int64_t count = 0;
  std::vector<std::int64_t> spike_steps;  // first step of each maximal run
  std::int64_t window = 0;
  double threshold_factor = 0.0;
};

/// A scatter pairing and its sample Pearson correlation.
struct CorrelationReport {
  std::string x_label;
  std::string y_label;
  double r = 0.0;
  int n_points = 0;
  std::vector<std::pair<double, double>> points;
  bool degenerate = false;  // two points always correlate to |r| = 1
};

/// Replayed learning-rate restart event.
struct RestartEvent {
  std::int64_t step = 0;
  std::int64_t tokens_seen = 0;
  double new_lr_multiplier = 0.0;
};

namespace phenomena_detail {

inline std::vector<double> moving_average(const std::vector<double>& v, int window) {
  const int n = static_cast<int>(v.size());
  const int h = window / 2;
  std::vector<double> out(v.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - h);
    const int hi = std::min(n - 1, i + h);
    double s = 0.0;
    for (int k = lo; k <= hi; ++k) s += v[k];
    out[i] = s / (hi - lo + 1);
  }
  return out;
}

inline double window_median(const std::vector<double>& v, int center, int half) {
  const int n = static_cast<int>(v.size());
  const int lo = std::max(0, center - half);
  const int hi = std::min(n - 1, center + half);
  std::vector<double> w(v.begin() + lo, v.begin() + hi + 1);
  const std::size_t mid = w.size() / 2;
  std::nth_element(w.begin(), w.begin() + mid, w.end());
  double med = w[mid];
  if (w.size() % 2 == 0) {
    std::nth_element(w.begin(), w.begin() + mid - 1, w.end());
    med = 0.5 * (med + w[mid - 1]);
  }
  return med;
}

}  // namespace phenomena_detail

/// Detect flat stretches of one modality's loss. The series is smoothed
/// with a centered moving average (edge-truncated) and a point is flat
/// when the smoothed loss a lookahead later has not dropped by more than
/// rel_tol relative. Near the end of the curve the lookahead clamps to
/// the last sample, so an everywhere-constant curve is 100% flat.
/// Warm-up points (step < warmup_steps) are excluded entirely.
inline FlatnessResult detect_flatness(const TrainingCurve& curve,
                                      const std::string& modality,
                                      std::int64_t warmup_steps = 0,
                                      int smooth_window = 51,
                                      std::int64_t lookahead_steps = 1000,
                                      double rel_tol = 1e-3) {
  validate(curve);
  if (smooth_window < 1 || smooth_window % 2 == 0)
    throw ValidationError("smooth_window must be odd and positive");
  if (static_cast<std::size_t>(smooth_window) > curve.points.size())
    throw ValidationError("smooth_window larger than the curve");
  if (lookahead_steps < 1) throw ValidationError("lookahead_steps must be positive");
  if (!(rel_tol > 0.0)) throw ValidationError("rel_tol must be positive");
  if (warmup_steps > curve.points.back().step)
    throw ValidationError("warmup covers the whole curve");

  const int n = static_cast<int>(curve.points.size());
  std::vector<double> losses(n);
  for (int i = 0; i < n; ++i) {
    const auto& pm = curve.points[i].per_modality_loss;
    auto it = pm.find(modality);
    if (it == pm.end())
      throw ValidationError("modality '" + modality + "' absent from curve");
    losses[i] = it->second;
  }
  const std::vector<double> smoothed =
      phenomena_detail::moving_average(losses, smooth_window);

  FlatnessResult result;
  int first = 0;
  while (first < n && curve.points[first].step < warmup_steps) ++first;
  result.warmup_steps_excluded = first;
  const int total = n - first;
  if (total <= 0) throw ValidationError("warmup covers the whole curve");

  int flat_count = 0;
  int run_start = -1;
  int ahead = first;
  for (int i = first; i < n; ++i) {
    const std::int64_t target = curve.points[i].step + lookahead_steps;
    if (ahead < i) ahead = i;
    while (ahead < n && curve.points[ahead].step < target) ++ahead;
    const int j = ahead < n ? ahead : n - 1;
    const bool flat = smoothed[j] >= smoothed[i] * (1.0 - rel_tol);
    if (flat) {
      ++flat_count;
      if (run_start < 0) run_start = i;
    } else if (run_start >= 0) {
      result.segments.emplace_back(curve.points[run_start].step,
                                   curve.points[i - 1].step);
      run_start = -1;
    }
  }
  if (run_start >= 0)
    result.segments.emplace_back(curve.points[run_start].step,
                                 curve.points[n - 1].step);
  result.flat_fraction = static_cast<double>(flat_count) / total;
  return result;
}

/// Count gradient-norm spikes: a point spikes when its norm exceeds
/// threshold_factor times the centered rolling median (edge-truncated),
/// and a maximal run of consecutive spiking points counts once.
inline SpikeResult count_spikes(const TrainingCurve& curve, int window = 101,
                                double threshold_factor = 2.0) {
  validate(curve);
  if (window < 3 || window % 2 == 0)
    throw ValidationError("window must be odd and at least 3");
  if (!(threshold_factor > 0.0))
    throw ValidationError("threshold_factor must be positive");

  const int n = static_cast<int>(curve.points.size());
  std::vector<double> norms(n);
  for (int i = 0; i < n; ++i) {
    if (!curve.points[i].grad_norm)
      throw ValidationError("grad_norm missing at index " + std::to_string(i));
    norms[i] = *curve.points[i].grad_norm;
  }

  SpikeResult result;
  result.window = window;
  result.threshold_factor = threshold_factor;
  const int half = window / 2;
  bool in_run = false;
  for (int i = 0; i < n; ++i) {
    const double med = phenomena_detail::window_median(norms, i, half);
    const bool spike = norms[i] > threshold_factor * med;
    if (spike && !in_run) result.spike_steps.push_back(curve.points[i].step);
    in_run = spike;
  }
  result.count = static_cast<std::int64_t>(result.spike_steps.size());
  return result;
}

/// Pick the batch size with the lowest final loss from a sweep of runs
/// that differ only in batch size. Ties go to the smaller batch.
inline std::uint64_t optimal_batch(const std::vector<RunRecord>& records) {
  if (records.size() < 2) throw ValidationError("need at least 2 candidates");
  for (const auto& r : records) validate(r);
  const auto& ref = records.front();
  for (const auto& r : records) {
    if (r.labels != ref.labels || r.n_params != ref.n_params ||
        r.tokens_per_dataset != ref.tokens_per_dataset)
      throw ValidationError("heterogeneous batch sweep: run " + r.run_id +
                            " differs beyond batch_size");
  }
  const RunRecord* best = &records.front();
  for (const auto& r : records) {
    if (r.final_loss < best->final_loss ||
        (r.final_loss == best->final_loss && r.batch_size < best->batch_size))
      best = &r;
  }
  return best->batch_size;
}

/// log of the pair's optimal batch over the sum of the per-modality
/// optimal batches.
inline double batch_ratio_stat(double opt_pair, double opt_i, double opt_j) {
  if (!(opt_pair > 0.0 && opt_i > 0.0 && opt_j > 0.0))
    throw ValidationError("batch sizes must be positive");
  return std::log(opt_pair / (opt_i + opt_j));
}

/// Replay the restart policy offline: whenever the running minimum of
/// the loss fails to improve for more than tokens_per_check tokens, emit
/// a restart with the learning-rate multiplier lr_factor^k, and restart
/// the window at that point.
inline std::vector<RestartEvent> restart_monitor(const TrainingCurve& curve,
                                                 std::int64_t tokens_per_check = 500000000,
                                                 double lr_factor = 0.8) {
  validate(curve);
  if (tokens_per_check <= 0) throw ValidationError("tokens_per_check must be positive");
  if (!(lr_factor > 0.0 && lr_factor <= 1.0))
    throw ValidationError("lr_factor must lie in (0,1]");

  std::vector<RestartEvent> events;
  double running_min = curve.points.front().loss;
  std::int64_t anchor = curve.points.front().tokens_seen;
  double multiplier = 1.0;
  for (const auto& p : curve.points) {
    if (p.loss < running_min) {
      running_min = p.loss;
      anchor = p.tokens_seen;
    } else if (p.tokens_seen - anchor > tokens_per_check) {
      multiplier *= lr_factor;
      events.push_back({p.step, p.tokens_seen, multiplier});
      anchor = p.tokens_seen;
    }
  }
  return events;
}

/// Sample Pearson correlation coefficient. Undefined for constant
/// series.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("series lengths differ");
  if (x.size() < 2) throw ValidationError("need at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("undefined correlation: constant series");
  const double r = sxy / (std::sqrt(sxx) * std::sqrt(syy));
  return std::clamp(r, -1.0, 1.0);  // rounding can push exact fits past 1
}

/// Everything observed about one trained pair that feeds the phenomena
/// correlations.
struct PairObservations {
  BimodalLaw law;
  TrainingCurve curve;  // mixed training log for the pair
  double n_params = 0.0;
  std::vector<RunRecord> batch_sweep_pair;
  std::vector<RunRecord> batch_sweep_i;
  std::vector<RunRecord> batch_sweep_j;
};

struct PhenomenaConfig {
  std::int64_t warmup_steps = 0;
  int smooth_window = 51;
  std::int64_t lookahead_steps = 1000;
  double rel_tol = 1e-3;
  int spike_window = 101;
  double spike_threshold = 2.0;
};

namespace phenomena_detail {

/// Flatness of every non-text source modality in the pair, averaged.
inline double non_text_flatness(const PairObservations& obs,
                                const PhenomenaConfig& cfg) {
  double total = 0.0;
  int count = 0;
  for (const std::string& m : {obs.law.modality_i, obs.law.modality_j}) {
    if (m == "text") continue;
    total += detect_flatness(obs.curve, m, cfg.warmup_steps, cfg.smooth_window,
                             cfg.lookahead_steps, cfg.rel_tol)
                 .flat_fraction;
    ++count;
  }
  if (count == 0)
    throw ValidationError("pair has no non-text modality for flatness");
  return total / count;
}

inline CorrelationReport make_correlation(std::string x_label, std::string y_label,
                                          std::vector<std::pair<double, double>> points) {
  CorrelationReport report;
  report.x_label = std::move(x_label);
  report.y_label = std::move(y_label);
  report.points = std::move(points);
  report.n_points = static_cast<int>(report.points.size());
  report.degenerate = report.n_points == 2;
  std::vector<double> xs, ys;
  xs.reserve(report.points.size());
  ys.reserve(report.points.size());
  for (const auto& [px, py] : report.points) {
    xs.push_back(px);
    ys.push_back(py);
  }
  report.r = pearson(xs, ys);
  return report;
}

}  // namespace phenomena_detail

/// Assemble the cross-pair correlation reports: the three observed
/// pairings (alpha vs flatness, beta vs batch ratio, log(N)/alpha vs
/// spike count) followed by the three null pairings kept for
/// inspection. Pairs are processed in sorted label order so the output
/// is deterministic.
inline std::vector<CorrelationReport> phenomena_report(
    std::vector<PairObservations> observations, const PhenomenaConfig& cfg = {}) {
  if (observations.size() < 2)
    throw ValidationError("need at least 2 pairs to correlate");
  std::sort(observations.begin(), observations.end(),
            [](const PairObservations& a, const PairObservations& b) {
              return a.law.modality_i + "|" + a.law.modality_j <
                     b.law.modality_i + "|" + b.law.modality_j;
            });

  std::vector<double> alphas, betas, flats, batch_ratios, spike_counts, instability;
  for (const auto& obs : observations) {
    validate(obs.law);
    if (!(obs.n_params > 0.0))
      throw ValidationError("pair observation needs a positive model size");
    alphas.push_back(obs.law.alpha);
    betas.push_back(obs.law.beta);
    flats.push_back(phenomena_detail::non_text_flatness(obs, cfg));
    const double opt_pair = static_cast<double>(optimal_batch(obs.batch_sweep_pair));
    const double opt_i = static_cast<double>(optimal_batch(obs.batch_sweep_i));
    const double opt_j = static_cast<double>(optimal_batch(obs.batch_sweep_j));
    batch_ratios.push_back(batch_ratio_stat(opt_pair, opt_i, opt_j));
    spike_counts.push_back(static_cast<double>(
        count_spikes(obs.curve, cfg.spike_window, cfg.spike_threshold).count));
    instability.push_back(std::log(obs.n_params) / obs.law.alpha);
  }

  auto zip = [](const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) pts.emplace_back(x[i], y[i]);
    return pts;
  };

  std::vector<CorrelationReport> reports;
  reports.push_back(phenomena_detail::make_correlation("alpha_ij", "flat_fraction",
                                                       zip(alphas, flats)));
  reports.push_back(phenomena_detail::make_correlation("beta_ij", "batch_ratio_stat",
                                                       zip(betas, batch_ratios)));
  reports.push_back(phenomena_detail::make_correlation("log_n_over_alpha_ij",
                                                       "spike_count",
                                                       zip(instability, spike_counts)));
  // Null findings, surfaced for inspection.
  reports.push_back(phenomena_detail::make_correlation("beta_ij", "flat_fraction",
                                                       zip(betas, flats)));
  reports.push_back(phenomena_detail::make_correlation("alpha_ij", "batch_ratio_stat",
                                                       zip(alphas, batch_ratios)));
  reports.push_back(phenomena_detail::make_correlation("beta_ij", "spike_count",
                                                       zip(betas, spike_counts)));
  return reports;
}

}  // namespace mmsl
