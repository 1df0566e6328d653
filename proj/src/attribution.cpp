#include <cmath>

#include "concept_circuits/circuit.hpp"
#include "concept_circuits/common.hpp"
#include "concept_circuits/parallel.hpp"

namespace cc {

namespace {

void check_finite(const Activations& acts, const GraphLayout& g, const char* run) {
  for (std::size_t u = 0; u + 1 < g.nodes.size(); ++u) {
    for (double x : acts.node_out[u].data) {
      if (!std::isfinite(x)) {
        throw NumericError(std::string("non-finite activation at node ") + node_name(g.nodes[u]) + " (" + run + " run)");
      }
    }
  }
  for (double x : acts.logits.data) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite activation at node logits (") + run + " run)");
  }
}

Mat metric_seed(const Activations& acts, const CorruptPair& pair, double scale) {
  Mat d(acts.logits.rows, acts.logits.cols);
  d(pair.metric_pos, pair.target) = scale;
  return d;
}

void validate_pair(const Parameters& params, const CorruptPair& pair) {
  require(pair.clean.size() == pair.corrupt.size(), "corrupt pair: sequences differ in length");
  require(pair.metric_pos >= 0 && pair.metric_pos < static_cast<int>(pair.clean.size()),
          "corrupt pair: metric position out of range");
  require(pair.target >= 0 && pair.target < params.config().vocab_size, "corrupt pair: target id out of range");
}

// Edge scores from node-output differences and (averaged) port-input gradients.
std::vector<double> edge_products(const GraphLayout& g, const Activations& clean, const Activations& corrupt,
                                  const std::vector<Mat>& port_grad) {
  std::vector<Mat> diff(g.nodes.size() - 1);
  for (std::size_t u = 0; u < diff.size(); ++u) {
    diff[u] = corrupt.node_out[u];
    for (std::size_t i = 0; i < diff[u].data.size(); ++i) diff[u].data[i] -= clean.node_out[u].data[i];
  }
  std::vector<double> scores(static_cast<std::size_t>(g.edge_count), 0.0);
  for (const auto& port : g.ports) {
    const Mat& grad = port_grad[static_cast<std::size_t>(port.id)];
    for (int u = 0; u < port.upstream; ++u) {
      const Mat& du = diff[static_cast<std::size_t>(u)];
      double s = 0.0;
      for (std::size_t i = 0; i < du.data.size(); ++i) s += du.data[i] * grad.data[i];
      scores[static_cast<std::size_t>(port.edge_base + u)] = s;
    }
  }
  return scores;
}

}  // namespace

double pair_metric(const Activations& acts, const CorruptPair& pair) {
  return acts.logits(pair.metric_pos, pair.target);
}

std::vector<double> eap_ig_edge_scores(const Parameters& params, const CorruptPair& pair,
                                       const AttributionOptions& options) {
  require(options.m >= 1, "EAP-IG needs m >= 1 interpolation steps");
  validate_pair(params, pair);
  const GraphLayout g = GraphLayout::make(params.config());
  const Activations clean = forward(params, pair.clean);
  const Activations corrupt = forward(params, pair.corrupt);
  check_finite(clean, g, "clean");
  check_finite(corrupt, g, "corrupted");

  const Mat& e_clean = clean.node_out[0];
  const Mat& e_corrupt = corrupt.node_out[0];
  std::vector<Mat> mean_grad;
  std::vector<Mat> grads;
  for (int k = 1; k <= options.m; ++k) {
    const double alpha = static_cast<double>(k) / options.m;
    Mat embed(e_clean.rows, e_clean.cols);
    for (std::size_t i = 0; i < embed.data.size(); ++i) {
      embed.data[i] = (1.0 - alpha) * e_clean.data[i] + alpha * e_corrupt.data[i];
    }
    ForwardOptions fo;
    fo.embed_override = &embed;
    const Activations interp = forward(params, pair.clean, fo);
    check_finite(interp, g, "interpolated");
    backward(params, interp, metric_seed(interp, pair, options.metric_scale), {}, &grads);
    if (k == 1) {
      mean_grad = std::move(grads);
    } else {
      for (std::size_t p = 0; p < grads.size(); ++p) add_inplace(mean_grad[p], grads[p]);
    }
  }
  if (options.m > 1) {
    for (auto& gm : mean_grad) {
      for (double& x : gm.data) x /= options.m;
    }
  }
  return edge_products(g, clean, corrupt, mean_grad);
}

std::vector<double> eap_edge_scores(const Parameters& params, const CorruptPair& pair, double metric_scale) {
  validate_pair(params, pair);
  const GraphLayout g = GraphLayout::make(params.config());
  const Activations clean = forward(params, pair.clean);
  const Activations corrupt = forward(params, pair.corrupt);
  check_finite(clean, g, "clean");
  check_finite(corrupt, g, "corrupted");
  std::vector<Mat> grads;
  backward(params, corrupt, metric_seed(corrupt, pair, metric_scale), {}, &grads);
  return edge_products(g, clean, corrupt, grads);
}

std::vector<double> aggregate_concept_scores(std::span<const std::vector<double>> per_sample) {
  require(!per_sample.empty(), "aggregate_concept_scores: no score sets");
  const std::size_t n = per_sample.front().size();
  std::vector<double> out(n, 0.0);
  for (const auto& s : per_sample) {
    require(s.size() == n, "aggregate_concept_scores: score sets come from different graphs");
    for (std::size_t i = 0; i < n; ++i) out[i] += s[i];
  }
  for (double& x : out) x /= static_cast<double>(per_sample.size());
  return out;
}

std::vector<double> concept_edge_scores(const Parameters& params, std::span<const CorruptPair> pairs,
                                        const AttributionOptions& options) {
  require(!pairs.empty(), "concept_edge_scores: no pairs");
  std::vector<std::vector<double>> per(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) { per[i] = eap_ig_edge_scores(params, pairs[i], options); });
  return aggregate_concept_scores(per);
}

namespace reference {

std::vector<double> concept_edge_scores(const Parameters& params, std::span<const CorruptPair> pairs,
                                        const AttributionOptions& options) {
  require(!pairs.empty(), "concept_edge_scores: no pairs");
  std::vector<std::vector<double>> per;
  for (const auto& p : pairs) per.push_back(eap_ig_edge_scores(params, p, options));
  return aggregate_concept_scores(per);
}

}  // namespace reference

}  // namespace cc
