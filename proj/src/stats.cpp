#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "concept_circuits/common.hpp"
#include "concept_circuits/stats.hpp"

namespace cc {

std::string_view pvalue_method_name(PValueMethod m) {
  return m == PValueMethod::TApprox ? "t_approx" : "permutation";
}

std::vector<double> average_ranks(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double mean(std::span<const double> xs) {
  require(!xs.empty(), "mean of an empty list");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size() && !xs.empty(), "pearson: inputs must be non-empty and of equal length");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return NAN;
  return sxy / std::sqrt(sxx * syy);
}

CorrelationResult spearman(std::span<const double> xs, std::span<const double> ys, const SpearmanOptions& options) {
  require(xs.size() == ys.size(), "spearman: inputs differ in length");
  require(xs.size() >= 3, "spearman: need at least 3 observations");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(std::isfinite(xs[i]) && std::isfinite(ys[i]), "spearman: inputs must be finite");
  }
  CorrelationResult r;
  r.n = static_cast<int>(xs.size());
  const auto rx = average_ranks(xs);
  auto ry = average_ranks(ys);
  const double rho = pearson(rx, ry);
  if (std::isnan(rho)) {
    r.defined = false;
    r.rho = NAN;
    r.p_value = NAN;
    return r;
  }
  r.rho = std::clamp(rho, -1.0, 1.0);

  if (r.n >= options.t_approx_min_n) {
    r.method = PValueMethod::TApprox;
    if (std::abs(r.rho) >= 1.0) {
      r.p_value = 0.0;
    } else {
      const double df = r.n - 2;
      const double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
      boost::math::students_t dist(df);
      r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
    }
    return r;
  }

  r.method = PValueMethod::Permutation;
  const double observed = std::abs(r.rho) - 1e-12;
  double fact = 1.0;
  for (int i = 2; i <= r.n; ++i) fact *= i;
  long long hits = 0;
  long long total = 0;
  if (fact <= options.permutations) {
    r.exact = true;
    std::vector<double> perm = ry;
    std::sort(perm.begin(), perm.end());
    do {
      hits += std::abs(pearson(rx, perm)) >= observed;
      ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    // Tied ranks make next_permutation skip duplicates; weight each distinct arrangement
    // equally, which matches the uniform distribution over all n! orderings.
    r.p_value = static_cast<double>(hits) / static_cast<double>(total);
  } else {
    std::mt19937_64 rng(mix_seed(options.seed, 0x7065726d));
    std::vector<double> perm = ry;
    for (int d = 0; d < options.permutations; ++d) {
      std::shuffle(perm.begin(), perm.end(), rng);
      hits += std::abs(pearson(rx, perm)) >= observed;
    }
    total = options.permutations;
    r.p_value = static_cast<double>(hits + 1) / static_cast<double>(total + 1);
  }
  return r;
}

}  // namespace cc
