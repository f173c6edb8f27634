#pragma once

// Shared fixtures: the seven published unimodal parameter sets used as
// ground truth throughout the tests, plus small deterministic helpers.

#include <vector>

#include "mmsl/laws.hpp"
#include "mmsl/random.hpp"

namespace fixtures {

inline std::vector<mmsl::UnimodalLaw> reference_laws() {
  return {
      {"code", 0.16, 611.91, 4484.08, 0.37, 0.32},
      {"image-text", 2.47, 320.51, 658.31, 0.12, 0.11},
      {"image", 2.84, 340.96, 875.30, 0.13, 0.13},
      {"molecules", 2.39, 158.19, 189.36, 0.37, 0.26},
      {"speech-text", 2.69, 180.68, 234.13, 0.32, 0.24},
      {"speech", 3.02, 154.45, 205.10, 0.31, 0.24},
      {"text", 2.42, 492.51, 1987.40, 0.18, 0.22},
  };
}

inline mmsl::UnimodalLaw speech_law() {
  return {"speech", 3.02, 154.45, 205.10, 0.31, 0.24};
}

inline mmsl::UnimodalLaw text_law() {
  return {"text", 2.42, 492.51, 1987.40, 0.18, 0.22};
}

/// The constructed pair law used across the analysis examples.
inline mmsl::BimodalLaw constructed_pair() {
  return {"speech", "text", speech_law(), text_law(), 0.5, 100.0, 200.0, 0.3, 0.25};
}

inline double uniform(mmsl::SplitMix64& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.next_unit();
}

inline double log_uniform(mmsl::SplitMix64& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline mmsl::UnimodalLaw random_unimodal(mmsl::SplitMix64& rng) {
  mmsl::UnimodalLaw law;
  law.modality = "m";
  law.E = uniform(rng, 0.1, 4.0);
  law.A = log_uniform(rng, 1.0, 1e3);
  law.B = log_uniform(rng, 1.0, 1e4);
  law.alpha = uniform(rng, 0.05, 0.95);
  law.beta = uniform(rng, 0.05, 0.95);
  return law;
}

/// Random pair law with a reachable barrier. The ranges keep the
/// compute-optimal point far below 1e14 parameters so a fixed-range
/// scan oracle resolves it.
inline mmsl::BimodalLaw random_bimodal(mmsl::SplitMix64& rng) {
  mmsl::BimodalLaw law;
  law.modality_i = "a";
  law.modality_j = "b";
  law.law_i = random_unimodal(rng);
  law.law_i.modality = "a";
  law.law_j = random_unimodal(rng);
  law.law_j.modality = "b";
  law.C = uniform(rng, 0.3, 1.0);
  law.A = log_uniform(rng, 10.0, 150.0);
  law.B = log_uniform(rng, 10.0, 500.0);
  law.alpha = uniform(rng, 0.28, 0.45);
  law.beta = uniform(rng, 0.28, 0.45);
  return law;
}

}  // namespace fixtures
