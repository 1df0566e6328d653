#pragma once

#include <random>
#include <vector>

#include "concept_circuits/model.hpp"

namespace fixture {

inline cc::ModelConfig tiny_config(int layers = 1, int heads = 1, int d = 4, int mlp = 8, int ctx = 6, int vocab = 7) {
  cc::ModelConfig c;
  c.n_layers = layers;
  c.n_heads = heads;
  c.d_model = d;
  c.d_mlp = mlp;
  c.context_len = ctx;
  c.vocab_size = vocab;
  return c;
}

/// Parameters with O(1) random entries so every path carries a non-trivial signal.
inline cc::Parameters random_parameters(const cc::ModelConfig& cfg, std::uint64_t seed, double scale = 0.5) {
  cc::Parameters p(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : p.values()) v = n(rng);
  return p;
}

inline std::vector<int> random_tokens(int len, int vocab, std::mt19937_64& rng, int first = 1) {
  std::uniform_int_distribution<int> u(first, vocab - 1);
  std::vector<int> t(static_cast<std::size_t>(len));
  for (int& x : t) x = u(rng);
  return t;
}

}  // namespace fixture
