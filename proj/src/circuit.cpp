#include <algorithm>
#include <cmath>
#include <map>

#include "concept_circuits/circuit.hpp"
#include "concept_circuits/common.hpp"
#include "concept_circuits/parallel.hpp"

namespace cc {

PreparedPair prepare_pair(const Parameters& params, const CorruptPair& pair) {
  require(pair.clean.size() == pair.corrupt.size(), "corrupt pair: sequences differ in length");
  PreparedPair p;
  p.pair = pair;
  p.corrupt_acts = forward(params, pair.corrupt);
  p.corrupt_metric = pair_metric(p.corrupt_acts, pair);
  p.clean_metric = pair_metric(forward(params, pair.clean), pair);
  return p;
}

double run_with_circuit(const Parameters& params, std::span<const char> edge_on, const PreparedPair& pair) {
  PatchSpec patch{edge_on, &pair.corrupt_acts};
  ForwardOptions fo;
  fo.patch = &patch;
  return pair_metric(forward(params, pair.pair.clean, fo), pair.pair);
}

double run_with_circuit(const Parameters& params, std::span<const char> edge_on, const CorruptPair& pair) {
  const Activations corrupt = forward(params, pair.corrupt);
  PatchSpec patch{edge_on, &corrupt};
  ForwardOptions fo;
  fo.patch = &patch;
  return pair_metric(forward(params, pair.clean, fo), pair);
}

namespace {

bool degenerate(const PreparedPair& p, const FaithfulnessOptions& o) {
  const double denom = o.raw_ratio ? p.clean_metric : p.clean_metric - p.corrupt_metric;
  return std::abs(denom) < o.degenerate_eps;
}

}  // namespace

FaithfulnessReport faithfulness(const Parameters& params, std::span<const char> edge_on,
                                std::span<const PreparedPair> pairs, const FaithfulnessOptions& options) {
  require(!pairs.empty(), "faithfulness needs at least one pair");
  std::vector<double> ratio(pairs.size(), 0.0);
  std::vector<char> used(pairs.size(), 0);
  parallel_for(pairs.size(), [&](std::size_t i) {
    const PreparedPair& p = pairs[i];
    if (degenerate(p, options)) return;
    used[i] = 1;
    const double m = run_with_circuit(params, edge_on, p);
    if (options.raw_ratio) {
      ratio[i] = m / p.clean_metric;
    } else {
      ratio[i] = std::clamp((m - p.corrupt_metric) / (p.clean_metric - p.corrupt_metric), 0.0, 1.0);
    }
  });
  FaithfulnessReport r;
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (used[i]) {
      sum += ratio[i];
      ++r.used_pairs;
    } else {
      ++r.excluded_pairs;
    }
  }
  if (r.used_pairs == 0) {
    throw InvalidArgument("faithfulness: all " + std::to_string(pairs.size()) +
                          " pairs have a clean-corrupt gap below the degeneracy threshold");
  }
  r.value = sum / r.used_pairs;
  return r;
}

Circuit select_circuit(const Parameters& params, std::span<const double> scores, std::span<const PreparedPair> pairs,
                       const ExtractOptions& options) {
  const CompGraph graph = CompGraph::build(params.config());
  require(static_cast<int>(scores.size()) == graph.edge_count(), "select_circuit: score vector does not match the graph");
  require(!pairs.empty(), "select_circuit: no pairs");
  require(std::isfinite(options.threshold), "select_circuit: threshold must be finite");

  Circuit c;
  c.concept_id = pairs.front().pair.concept_id;
  c.n_layers = params.config().n_layers;
  c.n_heads = params.config().n_heads;
  c.threshold = options.threshold;
  c.m = options.attribution.m;
  c.scores.assign(scores.begin(), scores.end());
  const int n_edges = graph.edge_count();
  const std::vector<int> ranking = rank_edges(scores);

  std::size_t live = 0;
  for (const auto& p : pairs) live += !degenerate(p, options.faithfulness);
  c.excluded_pairs = static_cast<int>(pairs.size() - live);

  std::map<int, double> cache;
  auto f = [&](int k) {
    auto it = cache.find(k);
    if (it != cache.end()) return it->second;
    const auto mask = prefix_mask(ranking, k, n_edges);
    const double v = faithfulness(params, mask, pairs, options.faithfulness).value;
    cache.emplace(k, v);
    return v;
  };

  int k = 0;
  if (options.threshold <= 0.0) {
    k = 0;
    c.faithfulness = live > 0 ? f(0) : 0.0;
  } else if (live == 0) {
    c.degenerate = true;
    c.unfaithful = true;
    k = n_edges;
  } else if (f(n_edges) < options.threshold) {
    c.unfaithful = true;
    k = n_edges;
  } else if (options.linear_scan) {
    while (f(k) < options.threshold) ++k;
  } else if (f(0) >= options.threshold) {
    k = 0;
  } else {
    // Invariant: f(lo) < threshold <= f(hi).
    int lo = 0;
    int hi = n_edges;
    while (hi - lo > 1) {
      const int mid = lo + (hi - lo) / 2;
      if (f(mid) >= options.threshold) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    k = hi;
  }
  c.k_edges = k;
  c.edges.assign(ranking.begin(), ranking.begin() + k);
  if (!c.degenerate && options.threshold > 0.0) c.faithfulness = f(k);
  c.reaches_logits = circuit_reaches_logits(graph, prefix_mask(ranking, k, n_edges));
  return c;
}

Circuit extract_circuit(const Parameters& params, std::span<const CorruptPair> pairs, const ExtractOptions& options) {
  require(!pairs.empty(), "extract_circuit: the concept has no samples");
  const std::vector<double> scores = concept_edge_scores(params, pairs, options.attribution);
  std::vector<PreparedPair> prepared(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) { prepared[i] = prepare_pair(params, pairs[i]); });
  return select_circuit(params, scores, prepared, options);
}

}  // namespace cc
