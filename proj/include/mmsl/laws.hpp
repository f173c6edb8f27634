#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>

#include "mmsl/errors.hpp"

namespace mmsl {

/// Loss model for a single modality,
///
///   L(N, D) = E + A / N^alpha + B / D^beta
///
/// with N the parameter count and D the token count. E is the
/// irreducible loss floor, the A term is the capacity (functional
/// approximation) error and the B term is the data (convergence) error.
/// All values are nats/token.
struct UnimodalLaw {
  std::string modality;
  double E = 0.0;
  double A = 0.0;
  double B = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  bool operator==(const UnimodalLaw&) const = default;
};

inline void validate(const UnimodalLaw& law) {
  auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (law.modality.empty()) throw ValidationError("law has empty modality");
  const std::string where = " in law for '" + law.modality + "'";
  if (!finite_pos(law.E)) throw ValidationError("E must be finite and positive" + where);
  if (!finite_pos(law.A)) throw ValidationError("A must be finite and positive" + where);
  if (!finite_pos(law.B)) throw ValidationError("B must be finite and positive" + where);
  if (!(law.alpha > 0.0 && law.alpha < 1.0))
    throw ValidationError("alpha must lie in (0,1)" + where);
  if (!(law.beta > 0.0 && law.beta < 1.0))
    throw ValidationError("beta must lie in (0,1)" + where);
}

/// Exponents above 1/2 exceed the theoretical efficiency bound for this
/// family of laws; callers may surface it as a diagnostic.
inline bool exceeds_exponent_bound(double alpha, double beta) {
  return alpha > 0.5 || beta > 0.5;
}

inline bool exceeds_exponent_bound(const UnimodalLaw& law) {
  return exceeds_exponent_bound(law.alpha, law.beta);
}

/// Joint loss model for a modality pair,
///
///   L(N, D_i, D_j) = [L_i(N, D_i) + L_j(N, D_j)] / 2
///                    - C + A / N^alpha + B / (D_i + D_j)^beta
///
/// C >= 0 is the maximum synergy between the two datasets; the A and B
/// terms price the competition in capacity and optimization. The data
/// term depends only on the total token count.
struct BimodalLaw {
  std::string modality_i;
  std::string modality_j;
  UnimodalLaw law_i;
  UnimodalLaw law_j;
  double C = 0.0;
  double A = 0.0;
  double B = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  bool operator==(const BimodalLaw&) const = default;
};

inline void validate(const BimodalLaw& law) {
  if (law.modality_i == law.modality_j)
    throw ValidationError("bimodal law needs two distinct modalities");
  if (law.modality_i != law.law_i.modality || law.modality_j != law.law_j.modality)
    throw ValidationError("pair labels do not match the embedded unimodal laws");
  validate(law.law_i);
  validate(law.law_j);
  const std::string where =
      " in law for '" + law.modality_i + "|" + law.modality_j + "'";
  if (!(std::isfinite(law.C) && law.C >= 0.0))
    throw ValidationError("C must be finite and non-negative" + where);
  if (!(std::isfinite(law.A) && law.A > 0.0))
    throw ValidationError("A must be finite and positive" + where);
  if (!(std::isfinite(law.B) && law.B > 0.0))
    throw ValidationError("B must be finite and positive" + where);
  if (!(law.alpha > 0.0 && law.alpha < 1.0))
    throw ValidationError("alpha must lie in (0,1)" + where);
  if (!(law.beta > 0.0 && law.beta < 1.0))
    throw ValidationError("beta must lie in (0,1)" + where);
}

/// Huber penalty: (1/2) x^2 for |x| <= delta, delta (|x| - delta/2) beyond.
/// Continuous with continuous first derivative at |x| = delta.
inline double huber(double delta, double x) {
  if (!(delta > 0.0)) throw ValidationError("huber delta must be positive");
  const double ax = std::fabs(x);
  if (ax <= delta) return 0.5 * x * x;
  return delta * (ax - 0.5 * delta);
}

/// d huber / dx.
inline double huber_derivative(double delta, double x) {
  if (std::fabs(x) <= delta) return x;
  return x > 0.0 ? delta : -delta;
}

/// log(sum(exp(terms))), computed with max-subtraction so it never
/// overflows. Always >= max(terms).
inline double lse(std::span<const double> terms) {
  if (terms.empty()) throw ValidationError("lse of an empty list");
  const double m = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

inline double lse(std::initializer_list<double> terms) {
  return lse(std::span<const double>(terms.begin(), terms.size()));
}

/// Evaluate a unimodal law at model size n and token count d.
/// Strictly decreasing in both arguments and always above law.E.
inline double eval_unimodal(const UnimodalLaw& law, double n, double d) {
  if (!(n > 0.0)) throw ValidationError("model size must be positive");
  if (!(d > 0.0)) throw ValidationError("token count must be positive");
  return law.E + law.A / std::pow(n, law.alpha) + law.B / std::pow(d, law.beta);
}

/// Evaluate a bimodal law at model size n and per-dataset token counts.
/// The law lives in the equal-subsample regime, so the unimodal average
/// is taken at half the total and the result depends on d_i and d_j only
/// through their sum. Throws NumericError if the synergy constant drives
/// the expression non-positive at the query point, which can happen
/// under extreme extrapolation.
inline double eval_bimodal(const BimodalLaw& law, double n, double d_i, double d_j) {
  if (!(n > 0.0)) throw ValidationError("model size must be positive");
  if (!(d_i > 0.0 && d_j > 0.0)) throw ValidationError("token counts must be positive");
  const double total = d_i + d_j;
  const double half = 0.5 * total;
  const double base =
      0.5 * (eval_unimodal(law.law_i, n, half) + eval_unimodal(law.law_j, n, half));
  const double value = base - law.C + law.A / std::pow(n, law.alpha) +
                       law.B / std::pow(total, law.beta);
  if (!(value > 0.0))
    throw NumericError("law invalid at query point: predicted loss is non-positive");
  return value;
}

}  // namespace mmsl
