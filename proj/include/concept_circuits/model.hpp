#pragma once

// Pre-layer-norm GPT-2-style decoder in double precision.
//
// The forward pass is written in "computational graph" form: every attention head and
// every MLP is a node whose output is added to the residual stream, and every node input
// (q/k/v of a head, the MLP input, the unembedding input) is a port reading the sum of
// all upstream node outputs. The standard model is the special case where every port
// sees the full sum; edge patching replaces individual terms of that sum.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "concept_circuits/tensor.hpp"

namespace cc {

struct ModelConfig {
  int n_layers = 4;
  int n_heads = 4;
  int d_model = 64;
  int d_mlp = 256;
  int context_len = 64;
  int vocab_size = 0;

  int d_head() const { return d_model / n_heads; }
  std::vector<std::string> violations() const;
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ParamTensor {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Offsets of every weight block inside the flat parameter vector.
struct ParamLayout {
  struct Layer {
    std::size_t ln1_g, ln1_b;
    std::size_t wq, bq, wk, bk, wv, bv, wo;  // per-head blocks, head-major
    std::size_t ln2_g, ln2_b;
    std::size_t w1, b1, w2, b2;
  };
  std::size_t wte = 0;
  std::size_t wpe = 0;
  std::vector<Layer> layers;
  std::size_t lnf_g = 0;
  std::size_t lnf_b = 0;
  std::size_t wu = 0;
  std::size_t total = 0;
  std::vector<ParamTensor> tensors;  // named view, in storage order

  static ParamLayout make(const ModelConfig& cfg);
};

class Parameters {
 public:
  Parameters() = default;
  explicit Parameters(const ModelConfig& cfg);  // zero-filled

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return *layout_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool all_finite() const;

  bool operator==(const Parameters& o) const { return config_ == o.config_ && values_ == o.values_; }

 private:
  ModelConfig config_;
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<double> values_;
};

/// GPT-2 style initialisation: N(0, 0.02) weights, output projections scaled by
/// 1/sqrt(2 n_layers), unit layer-norm gains, zero biases.
Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Graph numbering shared by the forward pass and circuit extraction.

enum class NodeKind { InputEmbed, AttnHead, Mlp, Logits };
enum class PortKind { Q, K, V, In };

struct GraphNode {
  int id = 0;
  NodeKind kind = NodeKind::InputEmbed;
  int layer = -1;  // -1 for embed, n_layers for logits
  int head = -1;
};

struct GraphPort {
  int id = 0;
  int node = 0;
  PortKind kind = PortKind::In;
  int upstream = 0;   // sources are nodes [0, upstream)
  int edge_base = 0;  // edge id of (source 0 -> this port)
};

/// Nodes: embed, then per layer its heads followed by its MLP, then logits.
/// Edges are enumerated port by port (in port order), source ascending.
struct GraphLayout {
  int n_layers = 0;
  int n_heads = 0;
  std::vector<GraphNode> nodes;
  std::vector<GraphPort> ports;
  int edge_count = 0;

  static GraphLayout make(const ModelConfig& cfg);
  int embed() const { return 0; }
  int head(int layer, int h) const { return 1 + layer * (n_heads + 1) + h; }
  int mlp(int layer) const { return 1 + layer * (n_heads + 1) + n_heads; }
  int logits() const { return 1 + n_layers * (n_heads + 1); }
  int head_port(int layer, int h, PortKind k) const { return layer * (3 * n_heads + 1) + 3 * h + static_cast<int>(k); }
  int mlp_port(int layer) const { return layer * (3 * n_heads + 1) + 3 * n_heads; }
  int logits_port() const { return n_layers * (3 * n_heads + 1); }
  int edge_id(int src, int port) const { return ports[static_cast<std::size_t>(port)].edge_base + src; }
};

std::string node_name(const GraphNode& n);
std::string port_name(PortKind k);

// ---------------------------------------------------------------------------
// Forward / backward

struct HeadCache {
  LayerNormCache ln[3];
  Mat y[3];  // layer-normed port inputs
  Mat q, k, v;
  Mat probs;  // T x T, row i attends to j <= i
  Mat z;
};

struct MlpCache {
  LayerNormCache ln;
  Mat y;
  Mat pre;  // pre-activation
  Mat act;
};

/// Everything a forward pass produced: per-node outputs and the intermediates the
/// backward pass needs.
struct Activations {
  std::vector<int> tokens;
  std::vector<Mat> node_out;  // T x d for embed/heads/mlps; the logits entry stays empty
  std::vector<HeadCache> heads;
  std::vector<MlpCache> mlps;
  LayerNormCache final_ln;
  Mat final_y;
  Mat logits;  // T x V
};

/// Edge-level interchange patching: ports read `corrupt` outputs for every edge whose
/// mask entry is 0 and the current run's outputs otherwise.
struct PatchSpec {
  std::span<const char> edge_on;
  const Activations* corrupt = nullptr;
};

struct PortPerturbation {
  int port = -1;
  const Mat* delta = nullptr;  // added to that port's input
};

struct ForwardOptions {
  /// Replaces the embedding node output (used for integrated-gradient interpolation).
  const Mat* embed_override = nullptr;
  const PatchSpec* patch = nullptr;
  PortPerturbation perturb;
};

/// Runs the model on one token sequence. Throws on out-of-range ids or over-long input.
Activations forward(const Parameters& params, std::span<const int> tokens, const ForwardOptions& options = {});

/// Embedding node output (token + position) for a token sequence.
Mat embed_tokens(const Parameters& params, std::span<const int> tokens);

/// Reverse-mode pass for an unpatched forward. Given dLoss/dlogits, accumulates
/// parameter gradients into `param_grad` (if non-empty) and, if `port_grads` is
/// non-null, stores dLoss/d(port input) for every port.
void backward(const Parameters& params, const Activations& acts, const Mat& dlogits, std::span<double> param_grad,
              std::vector<Mat>* port_grads = nullptr);

}  // namespace cc
