#include <cmath>
#include <random>

#include "concept_circuits/common.hpp"
#include "concept_circuits/model.hpp"

namespace cc {

std::vector<std::string> ModelConfig::violations() const {
  std::vector<std::string> v;
  if (n_layers < 1) v.push_back("model.n_layers must be >= 1");
  if (n_heads < 1) v.push_back("model.n_heads must be >= 1");
  if (d_model < 1) v.push_back("model.d_model must be >= 1");
  if (d_mlp < 1) v.push_back("model.d_mlp must be >= 1");
  if (context_len < 1) v.push_back("model.context_len must be >= 1");
  if (vocab_size < 1) v.push_back("model.vocab_size must be >= 1");
  if (n_heads >= 1 && d_model >= 1 && d_model % n_heads != 0) v.push_back("model.d_model must be divisible by model.n_heads");
  return v;
}

void ModelConfig::validate() const {
  const auto v = violations();
  if (!v.empty()) throw InvalidArgument("invalid model config: " + v.front());
}

ParamLayout ParamLayout::make(const ModelConfig& cfg) {
  cfg.validate();
  ParamLayout p;
  const int d = cfg.d_model;
  const int h = cfg.n_heads;
  const int dh = cfg.d_head();
  auto add = [&p](std::string name, int rows, int cols) {
    ParamTensor t{std::move(name), p.total, rows, cols};
    p.total += t.size();
    p.tensors.push_back(t);
    return t.offset;
  };
  p.wte = add("wte", cfg.vocab_size, d);
  p.wpe = add("wpe", cfg.context_len, d);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    Layer L{};
    L.ln1_g = add(pre + "ln1.g", 1, d);
    L.ln1_b = add(pre + "ln1.b", 1, d);
    L.wq = add(pre + "attn.wq", h * d, dh);
    L.bq = add(pre + "attn.bq", h, dh);
    L.wk = add(pre + "attn.wk", h * d, dh);
    L.bk = add(pre + "attn.bk", h, dh);
    L.wv = add(pre + "attn.wv", h * d, dh);
    L.bv = add(pre + "attn.bv", h, dh);
    L.wo = add(pre + "attn.wo", h * dh, d);
    L.ln2_g = add(pre + "ln2.g", 1, d);
    L.ln2_b = add(pre + "ln2.b", 1, d);
    L.w1 = add(pre + "mlp.w1", d, cfg.d_mlp);
    L.b1 = add(pre + "mlp.b1", 1, cfg.d_mlp);
    L.w2 = add(pre + "mlp.w2", cfg.d_mlp, d);
    L.b2 = add(pre + "mlp.b2", 1, d);
    p.layers.push_back(L);
  }
  p.lnf_g = add("lnf.g", 1, d);
  p.lnf_b = add("lnf.b", 1, d);
  p.wu = add("unembed", d, cfg.vocab_size);
  return p;
}

Parameters::Parameters(const ModelConfig& cfg)
    : config_(cfg), layout_(std::make_shared<const ParamLayout>(ParamLayout::make(cfg))), values_(layout_->total, 0.0) {}

bool Parameters::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  Parameters p(cfg);
  const ParamLayout& L = p.layout();
  auto v = p.values();
  std::mt19937_64 rng(mix_seed(seed, 0x696e6974));
  std::normal_distribution<double> normal(0.0, 0.02);
  const double resid_scale = 1.0 / std::sqrt(2.0 * cfg.n_layers);
  for (const auto& t : L.tensors) {
    const bool is_gain = t.name.ends_with(".g");
    const bool is_bias = t.name.ends_with(".b") || t.name.ends_with(".bq") || t.name.ends_with(".bk") ||
                         t.name.ends_with(".bv") || t.name.ends_with(".b1") || t.name.ends_with(".b2");
    const bool is_resid_out = t.name.ends_with("attn.wo") || t.name.ends_with("mlp.w2");
    for (std::size_t i = 0; i < t.size(); ++i) {
      double x = 0.0;
      if (is_gain) {
        x = 1.0;
      } else if (!is_bias) {
        x = normal(rng) * (is_resid_out ? resid_scale : 1.0);
      }
      v[t.offset + i] = x;
    }
  }
  return p;
}

GraphLayout GraphLayout::make(const ModelConfig& cfg) {
  cfg.validate();
  GraphLayout g;
  g.n_layers = cfg.n_layers;
  g.n_heads = cfg.n_heads;
  g.nodes.push_back({0, NodeKind::InputEmbed, -1, -1});
  for (int l = 0; l < cfg.n_layers; ++l) {
    for (int h = 0; h < cfg.n_heads; ++h) {
      g.nodes.push_back({static_cast<int>(g.nodes.size()), NodeKind::AttnHead, l, h});
    }
    g.nodes.push_back({static_cast<int>(g.nodes.size()), NodeKind::Mlp, l, -1});
  }
  g.nodes.push_back({static_cast<int>(g.nodes.size()), NodeKind::Logits, cfg.n_layers, -1});

  int edge = 0;
  auto add_port = [&](int node, PortKind kind, int upstream) {
    g.ports.push_back({static_cast<int>(g.ports.size()), node, kind, upstream, edge});
    edge += upstream;
  };
  for (int l = 0; l < cfg.n_layers; ++l) {
    for (int h = 0; h < cfg.n_heads; ++h) {
      for (PortKind k : {PortKind::Q, PortKind::K, PortKind::V}) add_port(g.head(l, h), k, g.head(l, 0));
    }
    add_port(g.mlp(l), PortKind::In, g.mlp(l));
  }
  add_port(g.logits(), PortKind::In, g.logits());
  g.edge_count = edge;
  return g;
}

std::string node_name(const GraphNode& n) {
  switch (n.kind) {
    case NodeKind::InputEmbed: return "embed";
    case NodeKind::AttnHead: return "a" + std::to_string(n.layer) + ".h" + std::to_string(n.head);
    case NodeKind::Mlp: return "m" + std::to_string(n.layer);
    case NodeKind::Logits: return "logits";
  }
  return "?";
}

std::string port_name(PortKind k) {
  switch (k) {
    case PortKind::Q: return "q";
    case PortKind::K: return "k";
    case PortKind::V: return "v";
    case PortKind::In: return "in";
  }
  return "?";
}

}  // namespace cc
