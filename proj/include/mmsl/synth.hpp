#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmsl/errors.hpp"
#include "mmsl/laws.hpp"
#include "mmsl/random.hpp"
#include "mmsl/records.hpp"

namespace mmsl {

enum class NoiseKind { none, lognormal_multiplicative };

/// Multiplicative lognormal perturbation: loss * exp(eps) with
/// eps ~ Normal(0, sigma^2) from the seeded generator.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

inline void validate(const NoiseSpec& noise) {
  if (noise.sigma < 0.0) throw ValidationError("noise sigma must be non-negative");
  if ((noise.kind == NoiseKind::none) != (noise.sigma == 0.0))
    throw ValidationError("noise sigma must be zero exactly when kind is none");
}

/// The model-size and token-count grids used throughout the examples:
/// seven sizes from 8M to 6.7B parameters and 5B/10B/100B tokens.
inline std::vector<std::uint64_t> standard_model_grid() {
  return {8000000ULL,    125000000ULL,  350000000ULL, 760000000ULL,
          1300000000ULL, 2700000000ULL, 6700000000ULL};
}

inline std::vector<std::uint64_t> standard_token_grid() {
  return {5000000000ULL, 10000000000ULL, 100000000000ULL};
}

namespace synth_detail {

inline double perturb(double value, const NoiseSpec& noise, std::uint64_t index) {
  if (noise.kind == NoiseKind::none) return value;
  SplitMix64 rng(mix_seed(noise.seed, index));
  return value * std::exp(noise.sigma * rng.next_normal());
}

inline std::string format_count(std::uint64_t v) { return std::to_string(v); }

}  // namespace synth_detail

/// One RunRecord per (n, d) grid cell with the loss drawn from the law.
/// Zero noise reproduces the law values exactly; a fixed seed reproduces
/// the same records on every call.
inline std::vector<RunRecord> generate_unimodal(const UnimodalLaw& law,
                                                std::span<const std::uint64_t> n_grid,
                                                std::span<const std::uint64_t> d_grid,
                                                const NoiseSpec& noise = {},
                                                std::uint64_t batch_size = 1000000,
                                                Objective objective = Objective::causal_masked) {
  validate(law);
  validate(noise);
  if (n_grid.empty() || d_grid.empty()) throw ValidationError("empty generation grid");
  std::vector<RunRecord> records;
  records.reserve(n_grid.size() * d_grid.size());
  std::uint64_t index = 0;
  for (std::uint64_t n : n_grid) {
    for (std::uint64_t d : d_grid) {
      if (n == 0 || d == 0) throw ValidationError("grids must be positive");
      RunRecord r;
      r.run_id = law.modality + "-n" + synth_detail::format_count(n) + "-d" +
                 synth_detail::format_count(d) + "-" + std::to_string(index);
      r.labels = {law.modality};
      r.n_params = n;
      r.tokens_per_dataset[law.modality] = d;
      r.final_loss = synth_detail::perturb(
          eval_unimodal(law, static_cast<double>(n), static_cast<double>(d)), noise,
          index);
      r.per_modality_final_loss = {{law.modality, r.final_loss}};
      r.batch_size = batch_size;
      r.objective = objective;
      validate(r);
      records.push_back(std::move(r));
      ++index;
    }
  }
  return records;
}

/// Mixed-pair records over (n, d_total) cells, with tokens split evenly
/// between the two datasets.
inline std::vector<RunRecord> generate_bimodal(const BimodalLaw& law,
                                               std::span<const std::uint64_t> n_grid,
                                               std::span<const std::uint64_t> d_total_grid,
                                               const NoiseSpec& noise = {},
                                               std::uint64_t batch_size = 1000000,
                                               Objective objective = Objective::causal_masked) {
  validate(law);
  validate(noise);
  if (n_grid.empty() || d_total_grid.empty()) throw ValidationError("empty generation grid");
  std::vector<RunRecord> records;
  records.reserve(n_grid.size() * d_total_grid.size());
  std::uint64_t index = 0;
  for (std::uint64_t n : n_grid) {
    for (std::uint64_t d_total : d_total_grid) {
      if (n == 0 || d_total == 0) throw ValidationError("grids must be positive");
      const std::uint64_t d_i = (d_total + 1) / 2;
      const std::uint64_t d_j = d_total / 2;
      RunRecord r;
      r.run_id = law.modality_i + "+" + law.modality_j + "-n" +
                 synth_detail::format_count(n) + "-d" +
                 synth_detail::format_count(d_total) + "-" + std::to_string(index);
      r.labels = {law.modality_i, law.modality_j};
      r.n_params = n;
      r.tokens_per_dataset[law.modality_i] = d_i;
      r.tokens_per_dataset[law.modality_j] = d_j;
      r.final_loss = synth_detail::perturb(
          eval_bimodal(law, static_cast<double>(n), static_cast<double>(d_i),
                       static_cast<double>(d_j)),
          noise, index);
      r.batch_size = batch_size;
      r.objective = objective;
      validate(r);
      records.push_back(std::move(r));
      ++index;
    }
  }
  return records;
}

/// A synthetic step-level curve: the baseline loss follows the law at
/// tokens_seen(t) = (t+1) * batch_tokens (strictly decreasing), planted
/// segments hold the loss at their first value and planted spikes lift
/// grad_norm above its otherwise constant 1.0. Closing the loop, the
/// flatness and spike detectors must recover exactly what was planted.
inline TrainingCurve generate_curve(const UnimodalLaw& law, double n,
                                    std::int64_t steps, std::int64_t batch_tokens,
                                    std::span<const std::pair<std::int64_t, std::int64_t>>
                                        planted_flats = {},
                                    std::span<const std::int64_t> planted_spikes = {},
                                    const NoiseSpec& noise = {},
                                    double spike_magnitude = 10.0) {
  validate(law);
  validate(noise);
  if (!(n > 0.0)) throw ValidationError("model size must be positive");
  if (steps <= 0) throw ValidationError("steps must be positive");
  if (batch_tokens <= 0) throw ValidationError("batch_tokens must be positive");
  std::vector<std::pair<std::int64_t, std::int64_t>> flats(planted_flats.begin(),
                                                           planted_flats.end());
  std::sort(flats.begin(), flats.end());
  for (std::size_t i = 0; i < flats.size(); ++i) {
    if (flats[i].first < 0 || flats[i].second >= steps || flats[i].first > flats[i].second)
      throw ValidationError("planted segment out of range");
    if (i > 0 && flats[i].first <= flats[i - 1].second)
      throw ValidationError("overlapping planted segments");
  }

  TrainingCurve curve;
  curve.run_id = law.modality + "-synthetic";
  curve.points.reserve(steps);
  std::size_t seg = 0;
  double held = 0.0;
  bool holding = false;
  for (std::int64_t t = 0; t < steps; ++t) {
    const std::int64_t tokens = (t + 1) * batch_tokens;
    while (seg < flats.size() && t > flats[seg].second) {
      ++seg;
      holding = false;
    }
    double loss;
    if (seg < flats.size() && t >= flats[seg].first && t <= flats[seg].second) {
      if (!holding) {
        held = eval_unimodal(law, n, static_cast<double>(tokens));
        holding = true;
      }
      loss = held;
    } else {
      loss = eval_unimodal(law, n, static_cast<double>(tokens));
    }
    loss = synth_detail::perturb(loss, noise, static_cast<std::uint64_t>(t));

    CurvePoint p;
    p.step = t;
    p.tokens_seen = tokens;
    p.loss = loss;
    p.per_modality_loss[law.modality] = loss;
    p.grad_norm = 1.0;
    p.learning_rate = 3e-4;
    curve.points.push_back(std::move(p));
  }
  for (std::int64_t s : planted_spikes) {
    if (s < 0 || s >= steps) throw ValidationError("planted spike out of range");
    curve.points[s].grad_norm = spike_magnitude;
  }
  validate(curve);
  return curve;
}

}  // namespace mmsl
