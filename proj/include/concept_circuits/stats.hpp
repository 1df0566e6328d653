#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cc {

enum class PValueMethod { TApprox, Permutation };
std::string_view pvalue_method_name(PValueMethod m);

struct CorrelationResult {
  double rho = 0.0;
  double p_value = 1.0;
  int n = 0;
  PValueMethod method = PValueMethod::TApprox;
  bool defined = true;       // false when either rank vector has zero variance
  bool exact = false;        // permutation p-value from full enumeration
};

struct SpearmanOptions {
  int t_approx_min_n = 30;
  int permutations = 10000;  // Monte Carlo draws when n! exceeds this
  std::uint64_t seed = 0;
};

/// 1-based ranks; tied values share the average of their positions.
std::vector<double> average_ranks(std::span<const double> xs);
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Spearman rank correlation with a two-sided p-value (t approximation for n >= 30,
/// exact or seeded Monte Carlo permutation below).
CorrelationResult spearman(std::span<const double> xs, std::span<const double> ys, const SpearmanOptions& options = {});

double mean(std::span<const double> xs);

}  // namespace cc
