#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmsl/errors.hpp"

namespace mmsl {

/// Training objective flavor of a run.
enum class Objective { causal, causal_masked };

inline std::string to_string(Objective o) {
  return o == Objective::causal ? "causal" : "causal-masked";
}

inline Objective objective_from_string(const std::string& s) {
  if (s == "causal") return Objective::causal;
  if (s == "causal-masked") return Objective::causal_masked;
  throw ParseError("unknown objective '" + s + "'");
}

/// One completed training run: model size, per-dataset token counts and
/// the final loss(es) in nats/token.
struct RunRecord {
  std::string run_id;
  std::vector<std::string> labels;  // 1 or 2 distinct modality names
  std::uint64_t n_params = 0;
  std::map<std::string, std::uint64_t> tokens_per_dataset;
  double final_loss = 0.0;
  std::optional<std::map<std::string, double>> per_modality_final_loss;
  std::uint64_t batch_size = 0;
  Objective objective = Objective::causal_masked;

  bool operator==(const RunRecord&) const = default;
};

/// Throws ValidationError naming the run when any invariant fails.
inline void validate(const RunRecord& r) {
  const std::string where = " in run " + (r.run_id.empty() ? "<unnamed>" : r.run_id);
  if (r.run_id.empty()) throw ValidationError("empty run_id");
  if (r.labels.empty() || r.labels.size() > 2)
    throw ValidationError("labels must have 1 or 2 entries" + where);
  if (r.labels.size() == 2 && r.labels[0] == r.labels[1])
    throw ValidationError("duplicate modality label" + where);
  if (r.n_params == 0) throw ValidationError("non-positive n_params" + where);
  if (r.batch_size == 0) throw ValidationError("non-positive batch_size" + where);
  if (!(r.final_loss > 0.0)) throw ValidationError("non-positive loss" + where);
  for (const auto& label : r.labels) {
    auto it = r.tokens_per_dataset.find(label);
    if (it == r.tokens_per_dataset.end())
      throw ValidationError("missing token count for '" + label + "'" + where);
    if (it->second == 0)
      throw ValidationError("non-positive token count for '" + label + "'" + where);
  }
  for (const auto& [name, count] : r.tokens_per_dataset)
    if (count == 0) throw ValidationError("non-positive token count for '" + name + "'" + where);
  if (r.per_modality_final_loss)
    for (const auto& [name, loss] : *r.per_modality_final_loss)
      if (!(loss > 0.0))
        throw ValidationError("non-positive loss for '" + name + "'" + where);
}

/// One sample of a step-level training trajectory.
struct CurvePoint {
  std::int64_t step = 0;
  std::int64_t tokens_seen = 0;
  double loss = 0.0;
  std::map<std::string, double> per_modality_loss;
  std::optional<double> grad_norm;
  std::optional<double> learning_rate;

  bool operator==(const CurvePoint&) const = default;
};

/// Step-level trajectory of one run. Steps are strictly increasing and
/// tokens_seen is non-decreasing.
struct TrainingCurve {
  std::string run_id;
  std::vector<CurvePoint> points;

  bool operator==(const TrainingCurve&) const = default;
};

inline void validate(const TrainingCurve& c) {
  if (c.points.empty()) throw ValidationError("empty training curve");
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    if (!(p.loss > 0.0))
      throw ValidationError("non-positive loss at index " + std::to_string(i));
    if (p.grad_norm && *p.grad_norm < 0.0)
      throw ValidationError("negative grad_norm at index " + std::to_string(i));
    if (p.learning_rate && !(*p.learning_rate > 0.0))
      throw ValidationError("non-positive learning_rate at index " + std::to_string(i));
    if (i > 0) {
      if (p.step <= c.points[i - 1].step)
        throw ValidationError("non-increasing step at index " + std::to_string(i));
      if (p.tokens_seen < c.points[i - 1].tokens_seen)
        throw ValidationError("tokens_seen decreased at index " + std::to_string(i));
    }
  }
}

}  // namespace mmsl
