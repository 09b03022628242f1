#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "wav/metrics.hpp"

using namespace wav;
using namespace wav::metrics;

namespace {

// Independent O(n^2) references.
std::vector<double> brute_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double below = 0, equal = 0;
    for (double v : x) {
      below += v < x[i];
      equal += v == x[i];
    }
    r[i] = below + (equal + 1) / 2;
  }
  return r;
}

double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = brute_ranks(x), ry = brute_ranks(y);
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double n = static_cast<double>(x.size());
  return 1 - 6 * d2 / (n * (n * n - 1));
}

double brute_kendall(const std::vector<double>& x, const std::vector<double>& y) {
  double c = 0, d = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double s = (x[i] - x[j]) * (y[i] - y[j]);
      c += s > 0;
      d += s < 0;
    }
  const double n = static_cast<double>(x.size());
  return (c - d) / (n * (n - 1) / 2);
}

bool constant(const std::vector<double>& v) {
  for (double e : v)
    if (e != v.front()) return false;
  return true;
}

}  // namespace

TEST_CASE("rank correlation worked examples") {
  CHECK(spearman({1, 2, 3, 4, 5}, {5, 6, 7, 8, 7}) == doctest::Approx(0.825));
  CHECK(spearman({1, 2, 3}, {3, 2, 1}) == -1.0);
  CHECK(spearman({1, 2, 3}, {2, 1, 3}) == doctest::Approx(0.5));
  CHECK(kendall({1, 2, 3}, {2, 1, 3}) == doctest::Approx(1.0 / 3.0));
  CHECK(kendall({1, 2, 3}, {1, 3, 2}) == doctest::Approx(1.0 / 3.0));
  CHECK(kendall({1, 2, 3, 4}, {1, 2, 3, 4}) == 1.0);
  CHECK(average_ranks({10, 20, 20, 30}) == std::vector<double>{1, 2.5, 2.5, 4});
}

TEST_CASE("rank correlations match brute force on random inputs") {
  Rng rng(1);
  int compared = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + rng.index(7);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.index(5));  // small alphabet forces ties
      y[i] = static_cast<double>(rng.index(5));
    }
    if (constant(x) || constant(y)) {
      CHECK_THROWS_AS(spearman(x, y), UndefinedMetric);
      CHECK_THROWS_AS(kendall(x, y), UndefinedMetric);
      continue;
    }
    CHECK(average_ranks(x) == brute_ranks(x));
    CHECK(std::abs(spearman(x, y) - brute_spearman(x, y)) <= 1e-12);
    CHECK(std::abs(kendall(x, y) - brute_kendall(x, y)) <= 1e-12);
    ++compared;
  }
  CHECK(compared > 800);
}

TEST_CASE("rank correlations are invariant to monotone maps and symmetric") {
  Rng rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 3 + rng.index(30);
    std::vector<double> x(n), y(n), fx(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = x[i] + rng.normal();
      fx[i] = std::exp(3 * x[i]) + 7;
    }
    CHECK(spearman(fx, y) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
    CHECK(kendall(fx, y) == doctest::Approx(kendall(x, y)).epsilon(1e-12));
    CHECK(spearman(y, x) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
    CHECK(kendall(y, x) == doctest::Approx(kendall(x, y)).epsilon(1e-12));
    CHECK(spearman(x, x) == doctest::Approx(1.0));
    for (double r : {spearman(x, y), kendall(x, y)}) {
      CHECK(r >= -1.0);
      CHECK(r <= 1.0);
    }
  }
}

TEST_CASE("rank correlation input errors") {
  CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), UndefinedMetric);
  CHECK_THROWS_AS(kendall({1, 2}, {1}), PreconditionError);
  CHECK_THROWS_AS(spearman({1}, {1}), PreconditionError);
}

TEST_CASE("dynamics accuracy") {
  const grid::FeatureLayout layout;
  Rng rng(3);
  const auto s0 = test::agent_facing(2, 2, 0, test::key(grid::Color::Red));
  const auto s1 = grid::step(s0, grid::Action::Toggle, rng);  // one cell changes
  const auto s2 = grid::step(s0, grid::Action::TurnLeft, rng);
  const auto f0 = grid::encode(layout, s0), f1 = grid::encode(layout, s1), f2 = grid::encode(layout, s2);

  CHECK(dynamics_accuracy({{f0, f1, f1}}) == 1.0);
  CHECK(dynamics_accuracy({{f0, f1, f0}}) == 0.0);
  // Pooled over changed groups: 1 right of 1, then 0 of 1.
  CHECK(dynamics_accuracy({{f0, f1, f1}, {f0, f2, f0}}) == 0.5);
  // Unchanged items contribute nothing, whatever the prediction.
  CHECK(dynamics_accuracy({{f0, f1, f1}, {f0, f0, f2}}) == 1.0);
  CHECK_THROWS_AS(dynamics_accuracy({{f0, f0, f1}}), UndefinedMetric);
  CHECK_THROWS_AS(dynamics_accuracy({}), UndefinedMetric);
}

TEST_CASE("prediction loss of the uniform model") {
  const grid::FeatureLayout layout;
  const model::WorldModel wm(layout);
  double expected = 0;
  for (int g = 0; g < layout.group_count(); ++g) expected += std::log(layout.group_size(g));
  expected /= layout.group_count();
  data::EnvConfig env;
  Rng rng(4);
  const auto test = data::collect_random_play(env, 50, rng);
  CHECK(prediction_loss(wm, test) == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(prediction_loss(wm, {}), PreconditionError);
}
