#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "mmsl/laws.hpp"
#include "mmsl/random.hpp"
#include "test_fixtures.hpp"

using namespace mmsl;

TEST_CASE("unimodal evaluation matches the published speech parameters") {
  // 3.02 + 154.45/(1e9)^0.31 + 205.10/(1e11)^0.24, checked by hand.
  const double value = eval_unimodal(fixtures::speech_law(), 1e9, 1e11);
  CHECK(value == Approx(3.740345525119757).epsilon(1e-12));
}

TEST_CASE("unimodal evaluation approaches the irreducible loss") {
  // Pick the query so each error term is exactly 1e-4 of its amplitude.
  for (const auto& law : fixtures::reference_laws()) {
    const double n = std::pow(law.A / 1e-4, 1.0 / law.alpha);
    const double d = std::pow(law.B / 1e-4, 1.0 / law.beta);
    CHECK(eval_unimodal(law, n, d) - law.E == Approx(2e-4).margin(1e-6));
  }
}

TEST_CASE("unimodal evaluation is strictly decreasing and floored at E") {
  SplitMix64 rng(41);
  for (int i = 0; i < 200; ++i) {
    const auto law = fixtures::random_unimodal(rng);
    const double n = fixtures::log_uniform(rng, 1e6, 1e13);
    const double d = fixtures::log_uniform(rng, 1e8, 1e13);
    const double at = eval_unimodal(law, n, d);
    CHECK(at > law.E);
    CHECK(eval_unimodal(law, 2 * n, d) < at);
    CHECK(eval_unimodal(law, n, 2 * d) < at);
  }
}

TEST_CASE("causal and causal-masked speech fits are close at a mid-scale point") {
  const UnimodalLaw speech_causal{"speech", 3.01, 164.12, 201.00, 0.30, 0.24};
  const double cm = eval_unimodal(fixtures::speech_law(), 1e9, 1e11);
  const double causal = eval_unimodal(speech_causal, 1e9, 1e11);
  CHECK(std::fabs(cm - causal) / cm < 0.02);
}

TEST_CASE("unimodal evaluation rejects non-positive queries") {
  CHECK_THROWS_AS(eval_unimodal(fixtures::speech_law(), 0.0, 1e9), ValidationError);
  CHECK_THROWS_AS(eval_unimodal(fixtures::speech_law(), 1e9, -1.0), ValidationError);
}

TEST_CASE("law validation guards the exponent domain") {
  auto law = fixtures::speech_law();
  CHECK_NOTHROW(validate(law));
  law.alpha = 1.0;
  CHECK_THROWS_AS(validate(law), ValidationError);
  law.alpha = 0.31;
  law.B = -1.0;
  CHECK_THROWS_AS(validate(law), ValidationError);
}

TEST_CASE("exponents above one half are flagged as a diagnostic") {
  CHECK_FALSE(exceeds_exponent_bound(fixtures::speech_law()));
  auto law = fixtures::speech_law();
  law.alpha = 0.6;
  CHECK(exceeds_exponent_bound(law));
}

TEST_CASE("bimodal evaluation matches the constructed pair law") {
  const auto pair = fixtures::constructed_pair();
  // Recomputed independently: baseline 13.430235069245446 - 0.5
  //   + 100/(1e9)^0.3 + 200/(1e11)^0.25.
  const double value = eval_bimodal(pair, 1e9, 5e10, 5e10);
  CHECK(value == Approx(13.485417182750119).epsilon(1e-12));

  const double l_i = eval_unimodal(pair.law_i, 1e9, 5e10);
  const double l_j = eval_unimodal(pair.law_j, 1e9, 5e10);
  CHECK(l_i == Approx(3.825386186001841).epsilon(1e-12));
  CHECK(l_j == Approx(23.035083952489053).epsilon(1e-12));
  const double rebuilt = 0.5 * (l_i + l_j) - pair.C +
                         pair.A / std::pow(1e9, pair.alpha) +
                         pair.B / std::pow(1e11, pair.beta);
  CHECK(value == Approx(rebuilt).epsilon(1e-15));
}

TEST_CASE("bimodal evaluation reduces to the unimodal average") {
  auto pair = fixtures::constructed_pair();
  pair.C = 0.0;
  pair.A = 1e-12;
  pair.B = 1e-12;
  pair.alpha = 0.5;
  pair.beta = 0.5;
  const double avg = 0.5 * (eval_unimodal(pair.law_i, 1e9, 5e10) +
                            eval_unimodal(pair.law_j, 1e9, 5e10));
  CHECK(eval_bimodal(pair, 1e9, 5e10, 5e10) == Approx(avg).epsilon(1e-9));
}

TEST_CASE("bimodal evaluation depends only on the token total") {
  const auto pair = fixtures::constructed_pair();
  const double total = 8e10;
  const double a = eval_bimodal(pair, 1e9, 0.5 * total, 0.5 * total);
  const double b = eval_bimodal(pair, 1e9, 0.1 * total, 0.9 * total);
  const double c = eval_bimodal(pair, 1e9, 0.7 * total, 0.3 * total);
  CHECK(a == Approx(b).epsilon(1e-12));
  CHECK(a == Approx(c).epsilon(1e-12));
}

TEST_CASE("bimodal evaluation refuses a non-positive prediction") {
  auto pair = fixtures::constructed_pair();
  pair.C = 50.0;  // synergy larger than any achievable loss
  CHECK_THROWS_AS(eval_bimodal(pair, 1e12, 1e13, 1e13), NumericError);
}

TEST_CASE("huber penalty values and smoothness") {
  CHECK(huber(0.03, 0.0) == 0.0);
  CHECK(huber(0.03, 0.01) == Approx(5e-5).epsilon(1e-12));
  CHECK(huber(0.03, 0.1) == Approx(0.00255).epsilon(1e-12));

  SECTION("even and convex") {
    SplitMix64 rng(7);
    for (int i = 0; i < 100; ++i) {
      const double x = fixtures::uniform(rng, -0.2, 0.2);
      CHECK(huber(0.03, x) == Approx(huber(0.03, -x)));
      const double h = 1e-4;
      const double second =
          huber(0.03, x + h) - 2 * huber(0.03, x) + huber(0.03, x - h);
      CHECK(second >= -1e-12);
    }
  }

  SECTION("first derivative continuous at the threshold") {
    const double delta = 0.03, h = 1e-8;
    for (double edge : {delta, -delta}) {
      const double inner = (huber(delta, edge) - huber(delta, edge - h)) / h;
      const double outer = (huber(delta, edge + h) - huber(delta, edge)) / h;
      CHECK(inner == Approx(outer).margin(1e-6));
      CHECK(huber_derivative(delta, edge) == Approx(edge > 0 ? delta : -delta));
    }
  }
}

TEST_CASE("lse basics") {
  CHECK(lse({0.0, 0.0}) == Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(lse({3.7}) == 3.7);
  CHECK(lse({1000.0, 1000.0}) == Approx(1000.0 + 0.6931471805599453).epsilon(1e-15));
  CHECK_THROWS_AS(lse(std::span<const double>{}), ValidationError);
}

TEST_CASE("lse agrees with the direct sum on moderate inputs") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> terms;
    const int len = 1 + static_cast<int>(rng.next_u64() % 8);
    for (int i = 0; i < len; ++i) terms.push_back(fixtures::uniform(rng, -5.0, 5.0));
    double direct = 0.0;
    for (double t : terms) direct += std::exp(t);
    CHECK(std::exp(lse(terms)) == Approx(direct).epsilon(1e-12));
    CHECK(lse(terms) >= *std::max_element(terms.begin(), terms.end()));
  }
}
