#include <cmath>
#include <numbers>
#include <random>

#include "../support/oracles.hpp"
#include "concept_circuits/stats.hpp"
#include "doctest.h"

using namespace cc;

namespace {

// Two-sided Student-t tail by Simpson integration of the density over [0, |t|].
double t_two_sided(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 20000;
  const double h = std::abs(t) / n;
  double s = pdf(0) + pdf(std::abs(t));
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

}  // namespace

TEST_CASE("average ranks share tied positions") {
  const std::vector<double> x = {3.0, 1.0, 3.0, 2.0, 3.0};
  CHECK(average_ranks(x) == std::vector<double>{4.0, 1.0, 4.0, 2.0, 4.0});
}

TEST_CASE("monotone and antitone relations give plus and minus one") {
  std::vector<double> x, up, down;
  for (int i = 0; i < 12; ++i) {
    x.push_back(i * 0.7 - 2);
    up.push_back(std::exp(x.back()));
    down.push_back(-x.back() * x.back() * x.back());
  }
  CHECK(spearman(x, up).rho == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(x, down).rho == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("ties match the exact rational oracle") {
  const std::vector<double> a = {1, 2, 2, 3}, b = {2, 1, 3, 3};
  const auto r = spearman(a, b);
  CHECK(oracle::exact_spearman({1, 2, 2, 3}, {2, 1, 3, 3}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.rho == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.exact);

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(0, 4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 3 + trial; ++i) {
      x.push_back(u(rng));
      y.push_back(u(rng));
    }
    const auto r2 = spearman(x, y);
    if (!r2.defined) continue;
    CHECK(std::abs(r2.rho - oracle::exact_spearman(x, y)) <= 1e-12);
  }
}

TEST_CASE("exact permutation p-value for a perfect ranking") {
  const std::vector<double> x = {1, 2, 3, 4, 5}, y = {10, 20, 30, 40, 50};
  const auto r = spearman(x, y);
  CHECK(r.method == PValueMethod::Permutation);
  CHECK(r.exact);
  CHECK(r.p_value == doctest::Approx(2.0 / 120.0).epsilon(1e-14));
}

TEST_CASE("t approximation matches numerical integration") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(n(rng));
    y.push_back(x.back() + 1.5 * n(rng));
  }
  const auto r = spearman(x, y);
  CHECK(r.method == PValueMethod::TApprox);
  const double t = r.rho * std::sqrt(38 / (1 - r.rho * r.rho));
  CHECK(r.p_value == doctest::Approx(t_two_sided(t, 38)).epsilon(1e-8));
}

TEST_CASE("Monte Carlo p-values are reproducible under a seed") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> x, y;
  for (int i = 0; i < 15; ++i) {
    x.push_back(n(rng));
    y.push_back(x.back() + n(rng));
  }
  SpearmanOptions o;
  o.seed = 77;
  o.permutations = 2000;
  const auto a = spearman(x, y, o), b = spearman(x, y, o);
  CHECK_FALSE(a.exact);
  CHECK(a.p_value == b.p_value);
  CHECK(a.p_value > 0.0);
  CHECK(a.p_value <= 1.0);
}

TEST_CASE("rank correlation ignores monotone transforms") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> x, y, tx;
  for (int i = 0; i < 25; ++i) {
    x.push_back(n(rng));
    y.push_back(n(rng) + x.back());
    tx.push_back(std::exp(3 * x.back()) + 7);
  }
  CHECK(spearman(x, y).rho == doctest::Approx(spearman(tx, y).rho).epsilon(1e-14));
}

TEST_CASE("constant input is undefined; bad input throws") {
  const std::vector<double> c = {1, 1, 1, 1}, x = {1, 2, 3, 4};
  CHECK_FALSE(spearman(c, x).defined);
  CHECK_THROWS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}));
  CHECK_THROWS(spearman(x, std::vector<double>{1, 2, 3}));
  CHECK_THROWS(spearman(x, std::vector<double>{1, 2, NAN, 4}));
}
