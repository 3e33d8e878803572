#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "syncsel/rng.hpp"
#include "syncsel/scores.hpp"
#include "syncsel/theory.hpp"

using namespace syncsel;

TEST_CASE("sr_score basics") {
  CHECK(sr_score(std::vector<double>{0.1, 0.6, 0.3}) == doctest::Approx(0.6));
  CHECK(sr_score(std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(0.25));
  CHECK(sr_score(std::vector<double>{0.0, 1.0, 0.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(sr_score(std::vector<double>{0.5, 0.6}),
                  std::invalid_argument);
  CHECK_THROWS_AS(sr_score(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("smp_score basics") {
  CHECK(smp_score(std::vector<double>{0.5, 0.3, 0.2}, 2.0) ==
        doctest::Approx(0.25));
  CHECK(smp_score(std::vector<double>{0.81, 0.1, 0.09}, 0.5) ==
        doctest::Approx(0.9));
  CHECK_THROWS_AS(smp_score(std::vector<double>{0.5, 0.5}, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(smp_score(std::vector<double>{0.5, 0.5}, -1.0),
                  std::invalid_argument);
}

TEST_CASE("smp equals sr exactly at gamma 1") {
  std::mt19937_64 rng(11);
  for (std::size_t c : {2, 3, 10}) {
    for (int t = 0; t < 2000; ++t) {
      const auto p = sample_simplex(c, rng);
      CHECK(smp_score(p, 1.0) == sr_score(p));
    }
  }
}

TEST_CASE("neg_entropy_score endpoints and continuity") {
  CHECK(neg_entropy_score(std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(neg_entropy_score(std::vector<double>{1.0, 0.0, 0.0}) ==
        doctest::Approx(1.0).epsilon(1e-9));
  // approaches 0 continuously near uniform
  double prev = 1.0;
  for (double delta : {1e-2, 1e-4, 1e-6}) {
    const double s =
        neg_entropy_score(std::vector<double>{0.5 + delta, 0.5 - delta});
    CHECK(s < prev);
    CHECK(s >= 0.0);
    prev = s;
  }
  CHECK(prev < 1e-9);
}

TEST_CASE("score dispatch") {
  std::mt19937_64 rng(17);
  const auto p = sample_simplex(5, rng);
  CHECK(score(p, ScoreKind::sr()) == sr_score(p));
  CHECK(score(p, ScoreKind::smp(1.0)) == sr_score(p));
  const auto uniform = std::vector<double>{0.25, 0.25, 0.25, 0.25};
  CHECK(score(uniform, ScoreKind::neg_entropy()) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("scores are permutation invariant") {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 200; ++t) {
    auto p = sample_simplex(6, rng);
    auto q = p;
    std::shuffle(q.begin(), q.end(), rng);
    for (const auto& kind :
         {ScoreKind::sr(), ScoreKind::smp(0.5), ScoreKind::smp(2.5),
          ScoreKind::neg_entropy()}) {
      CHECK(score(p, kind) == doctest::Approx(score(q, kind)).epsilon(1e-12));
    }
  }
}

TEST_CASE("scores hit 1 only near vertices") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 500; ++t) {
    auto p = sample_simplex(4, rng);
    const double m = *std::max_element(p.begin(), p.end());
    if (m > 0.999) continue;  // interior points only
    for (const auto& kind :
         {ScoreKind::sr(), ScoreKind::smp(0.5), ScoreKind::smp(2.5),
          ScoreKind::neg_entropy()}) {
      CHECK(score(p, kind) < 1.0);
    }
  }
}

TEST_CASE("max coordinate of a simplex sample lies in [1/C, 1]") {
  std::mt19937_64 rng(29);
  for (std::size_t c : {2, 5, 100}) {
    for (int t = 0; t < 500; ++t) {
      const auto p = sample_simplex(c, rng);
      const double m = *std::max_element(p.begin(), p.end());
      CHECK(m >= 1.0 / static_cast<double>(c));
      CHECK(m <= 1.0);
    }
  }
}

TEST_CASE("smp gap is bounded by the Lipschitz modulus") {
  std::mt19937_64 rng(31);
  for (double gamma : {0.5, 1.0, 2.5}) {
    for (std::size_t c : {2, 5, 20}) {
      const double modulus = lipschitz_modulus(gamma, c);
      for (int t = 0; t < 3000; ++t) {
        const auto u = sample_simplex(c, rng);
        const auto v = sample_simplex(c, rng);
        double dinf = 0.0;
        for (std::size_t i = 0; i < c; ++i)
          dinf = std::max(dinf, std::abs(u[i] - v[i]));
        CHECK(std::abs(smp_score(u, gamma) - smp_score(v, gamma)) <=
              modulus * dinf + 1e-12);
      }
    }
  }
}

TEST_CASE("score_grad matches finite differences on the simplex") {
  // perturb two coordinates in opposite directions to stay on the simplex
  std::mt19937_64 rng(37);
  const double eps = 1e-7;
  for (const auto& kind : {ScoreKind::smp(0.5), ScoreKind::smp(2.5),
                           ScoreKind::neg_entropy()}) {
    for (int t = 0; t < 100; ++t) {
      auto p = sample_simplex(5, rng);
      // keep clear of argmax ties and clamps
      std::sort(p.begin(), p.end());
      if (p[4] - p[3] < 1e-3 || p[0] < 1e-6) continue;
      const auto g = score_grad(p, kind);
      for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        auto up = p, down = p;
        up[i] += eps;
        up[4] -= eps;
        down[i] -= eps;
        down[4] += eps;
        const double fd = (score(up, kind) - score(down, kind)) / (2 * eps);
        CHECK(fd == doctest::Approx(g[i] - g[4]).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("score kind parsing") {
  CHECK(parse_score_kind("sr", 1.0).tag == ScoreTag::SR);
  CHECK(parse_score_kind("smp", 2.5).gamma == doctest::Approx(2.5));
  CHECK(parse_score_kind("negent", 1.0).tag == ScoreTag::NegEntropy);
  CHECK_THROWS_AS(parse_score_kind("spike", 1.0), std::invalid_argument);
  CHECK(score_name(ScoreKind::smp(2.0)) == "smp");
}
