#include <cmath>

#include "concept_circuits/common.hpp"
#include "concept_circuits/model.hpp"

namespace cc {

namespace {

struct Views {
  const double* base;
  double* grad;  // null when parameter gradients are not requested

  WeightView w(std::size_t off, int rows, int cols) const { return {base + off, rows, cols}; }
  const double* p(std::size_t off) const { return base + off; }
  GradView gw(std::size_t off, int rows, int cols) const { return {grad + off, rows, cols}; }
  double* g(std::size_t off) const { return grad ? grad + off : nullptr; }
};

void head_forward(const ModelConfig& cfg, const ParamLayout::Layer& L, const Views& v, int h, const Mat* in[3],
                  HeadCache& c, Mat& out) {
  const int d = cfg.d_model;
  const int dh = cfg.d_head();
  const std::size_t w_off = static_cast<std::size_t>(h) * d * dh;
  const std::size_t b_off = static_cast<std::size_t>(h) * dh;
  for (int p = 0; p < 3; ++p) layer_norm(*in[p], v.p(L.ln1_g), v.p(L.ln1_b), c.y[p], c.ln[p]);
  matmul(c.y[0], v.w(L.wq + w_off, d, dh), v.p(L.bq + b_off), c.q);
  matmul(c.y[1], v.w(L.wk + w_off, d, dh), v.p(L.bk + b_off), c.k);
  matmul(c.y[2], v.w(L.wv + w_off, d, dh), v.p(L.bv + b_off), c.v);

  const int t_len = c.q.rows;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.probs = Mat(t_len, t_len);
  c.z = Mat(t_len, dh);
  for (int i = 0; i < t_len; ++i) {
    double* pr = c.probs.row(i);
    const double* qi = c.q.row(i);
    double mx = -INFINITY;
    for (int j = 0; j <= i; ++j) {
      const double* kj = c.k.row(j);
      double s = 0.0;
      for (int e = 0; e < dh; ++e) s += qi[e] * kj[e];
      pr[j] = s * scale;
      mx = std::max(mx, pr[j]);
    }
    double sum = 0.0;
    for (int j = 0; j <= i; ++j) {
      pr[j] = std::exp(pr[j] - mx);
      sum += pr[j];
    }
    double* zi = c.z.row(i);
    for (int j = 0; j <= i; ++j) {
      pr[j] /= sum;
      const double* vj = c.v.row(j);
      for (int e = 0; e < dh; ++e) zi[e] += pr[j] * vj[e];
    }
  }
  matmul(c.z, v.w(L.wo + static_cast<std::size_t>(h) * dh * d, dh, d), nullptr, out);
}

void head_backward(const ModelConfig& cfg, const ParamLayout::Layer& L, const Views& v, int h, const HeadCache& c,
                   const Mat& dout, Mat din[3]) {
  const int d = cfg.d_model;
  const int dh = cfg.d_head();
  const int t_len = dout.rows;
  const std::size_t w_off = static_cast<std::size_t>(h) * d * dh;
  const std::size_t b_off = static_cast<std::size_t>(h) * dh;
  const std::size_t wo_off = L.wo + static_cast<std::size_t>(h) * dh * d;

  if (v.grad) accumulate_outer(c.z, dout, v.gw(wo_off, dh, d));
  Mat dz;
  matmul_transposed(dout, v.w(wo_off, dh, d), dz);

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat dq(t_len, dh), dk(t_len, dh), dv(t_len, dh);
  std::vector<double> dp(static_cast<std::size_t>(t_len));
  for (int i = 0; i < t_len; ++i) {
    const double* pr = c.probs.row(i);
    const double* dzi = dz.row(i);
    double dot = 0.0;
    for (int j = 0; j <= i; ++j) {
      const double* vj = c.v.row(j);
      double s = 0.0;
      for (int e = 0; e < dh; ++e) s += dzi[e] * vj[e];
      dp[static_cast<std::size_t>(j)] = s;
      dot += pr[j] * s;
      double* dvj = dv.row(j);
      for (int e = 0; e < dh; ++e) dvj[e] += pr[j] * dzi[e];
    }
    const double* qi = c.q.row(i);
    double* dqi = dq.row(i);
    for (int j = 0; j <= i; ++j) {
      const double ds = pr[j] * (dp[static_cast<std::size_t>(j)] - dot) * scale;
      if (ds == 0.0) continue;
      const double* kj = c.k.row(j);
      double* dkj = dk.row(j);
      for (int e = 0; e < dh; ++e) {
        dqi[e] += ds * kj[e];
        dkj[e] += ds * qi[e];
      }
    }
  }

  const Mat* dproj[3] = {&dq, &dk, &dv};
  const std::size_t w_base[3] = {L.wq, L.wk, L.wv};
  const std::size_t b_base[3] = {L.bq, L.bk, L.bv};
  Mat dy;
  for (int p = 0; p < 3; ++p) {
    if (v.grad) {
      accumulate_outer(c.y[p], *dproj[p], v.gw(w_base[p] + w_off, d, dh));
      accumulate_colsum(*dproj[p], v.grad + b_base[p] + b_off);
    }
    matmul_transposed(*dproj[p], v.w(w_base[p] + w_off, d, dh), dy);
    layer_norm_backward(dy, c.ln[p], v.p(L.ln1_g), v.g(L.ln1_g), v.g(L.ln1_b), din[p]);
  }
}

void mlp_forward(const ModelConfig& cfg, const ParamLayout::Layer& L, const Views& v, const Mat& in, MlpCache& c,
                 Mat& out) {
  const int d = cfg.d_model;
  layer_norm(in, v.p(L.ln2_g), v.p(L.ln2_b), c.y, c.ln);
  matmul(c.y, v.w(L.w1, d, cfg.d_mlp), v.p(L.b1), c.pre);
  c.act = Mat(c.pre.rows, c.pre.cols);
  for (std::size_t i = 0; i < c.pre.data.size(); ++i) c.act.data[i] = gelu(c.pre.data[i]);
  matmul(c.act, v.w(L.w2, cfg.d_mlp, d), v.p(L.b2), out);
}

void mlp_backward(const ModelConfig& cfg, const ParamLayout::Layer& L, const Views& v, const MlpCache& c,
                  const Mat& dout, Mat& din) {
  const int d = cfg.d_model;
  if (v.grad) {
    accumulate_outer(c.act, dout, v.gw(L.w2, cfg.d_mlp, d));
    accumulate_colsum(dout, v.grad + L.b2);
  }
  Mat dpre;
  matmul_transposed(dout, v.w(L.w2, cfg.d_mlp, d), dpre);
  for (std::size_t i = 0; i < dpre.data.size(); ++i) dpre.data[i] *= gelu_grad(c.pre.data[i]);
  if (v.grad) {
    accumulate_outer(c.y, dpre, v.gw(L.w1, d, cfg.d_mlp));
    accumulate_colsum(dpre, v.grad + L.b1);
  }
  Mat dy;
  matmul_transposed(dpre, v.w(L.w1, d, cfg.d_mlp), dy);
  layer_norm_backward(dy, c.ln, v.p(L.ln2_g), v.g(L.ln2_g), v.g(L.ln2_b), din);
}

// Sum of upstream outputs for a port, with per-edge substitution of corrupted outputs.
Mat patched_port_input(const GraphLayout& g, const Activations& cur, const PatchSpec& patch, int port) {
  const GraphPort& p = g.ports[static_cast<std::size_t>(port)];
  auto src = [&](int u) -> const Mat& {
    return patch.edge_on[static_cast<std::size_t>(p.edge_base + u)] ? cur.node_out[static_cast<std::size_t>(u)]
                                                                      : patch.corrupt->node_out[static_cast<std::size_t>(u)];
  };
  Mat out = src(0);
  for (int u = 1; u < p.upstream; ++u) add_inplace(out, src(u));
  return out;
}

}  // namespace

Mat embed_tokens(const Parameters& params, std::span<const int> tokens) {
  const ModelConfig& cfg = params.config();
  const ParamLayout& L = params.layout();
  const auto v = params.values();
  const int d = cfg.d_model;
  Mat out(static_cast<int>(tokens.size()), d);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const double* te = v.data() + L.wte + static_cast<std::size_t>(tokens[t]) * d;
    const double* pe = v.data() + L.wpe + t * d;
    double* o = out.row(static_cast<int>(t));
    for (int j = 0; j < d; ++j) o[j] = te[j] + pe[j];
  }
  return out;
}

Activations forward(const Parameters& params, std::span<const int> tokens, const ForwardOptions& options) {
  const ModelConfig& cfg = params.config();
  const ParamLayout& L = params.layout();
  if (tokens.empty()) throw InvalidArgument("forward: empty token sequence");
  if (static_cast<int>(tokens.size()) > cfg.context_len) {
    throw InvalidArgument("forward: sequence of " + std::to_string(tokens.size()) + " tokens exceeds context_len " +
                          std::to_string(cfg.context_len));
  }
  for (int t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      throw InvalidArgument("forward: token id " + std::to_string(t) + " out of range [0, " +
                            std::to_string(cfg.vocab_size) + ")");
    }
  }
  const GraphLayout g = GraphLayout::make(cfg);
  const Views v{params.values().data(), nullptr};
  const PatchSpec* patch = options.patch;
  if (patch) {
    require(patch->corrupt != nullptr, "forward: patch spec without corrupted activations");
    require(patch->edge_on.size() == static_cast<std::size_t>(g.edge_count), "forward: edge mask size mismatch");
    require(patch->corrupt->tokens.size() == tokens.size(), "forward: corrupted run has a different length");
  }

  Activations a;
  a.tokens.assign(tokens.begin(), tokens.end());
  a.node_out.resize(g.nodes.size());
  a.heads.resize(static_cast<std::size_t>(cfg.n_layers * cfg.n_heads));
  a.mlps.resize(static_cast<std::size_t>(cfg.n_layers));
  if (options.embed_override) {
    require(options.embed_override->rows == static_cast<int>(tokens.size()) &&
                options.embed_override->cols == cfg.d_model,
            "forward: embed override has the wrong shape");
    a.node_out[0] = *options.embed_override;
  } else {
    a.node_out[0] = embed_tokens(params, tokens);
  }

  Mat resid = a.node_out[0];
  auto port_input = [&](int port, const Mat& standard) -> Mat {
    Mat in = patch ? patched_port_input(g, a, *patch, port) : standard;
    if (options.perturb.port == port) add_inplace(in, *options.perturb.delta);
    return in;
  };

  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& PL = L.layers[static_cast<std::size_t>(l)];
    for (int h = 0; h < cfg.n_heads; ++h) {
      Mat inputs[3];
      const Mat* in_ptr[3];
      for (int p = 0; p < 3; ++p) {
        inputs[p] = port_input(g.head_port(l, h, static_cast<PortKind>(p)), resid);
        in_ptr[p] = &inputs[p];
      }
      head_forward(cfg, PL, v, h, in_ptr, a.heads[static_cast<std::size_t>(l * cfg.n_heads + h)],
                   a.node_out[static_cast<std::size_t>(g.head(l, h))]);
    }
    for (int h = 0; h < cfg.n_heads; ++h) add_inplace(resid, a.node_out[static_cast<std::size_t>(g.head(l, h))]);
    const Mat mlp_in = port_input(g.mlp_port(l), resid);
    mlp_forward(cfg, PL, v, mlp_in, a.mlps[static_cast<std::size_t>(l)], a.node_out[static_cast<std::size_t>(g.mlp(l))]);
    add_inplace(resid, a.node_out[static_cast<std::size_t>(g.mlp(l))]);
  }
  const Mat final_in = port_input(g.logits_port(), resid);
  layer_norm(final_in, v.p(L.lnf_g), v.p(L.lnf_b), a.final_y, a.final_ln);
  matmul(a.final_y, v.w(L.wu, cfg.d_model, cfg.vocab_size), nullptr, a.logits);
  return a;
}

void backward(const Parameters& params, const Activations& acts, const Mat& dlogits, std::span<double> param_grad,
              std::vector<Mat>* port_grads) {
  const ModelConfig& cfg = params.config();
  const ParamLayout& L = params.layout();
  const GraphLayout g = GraphLayout::make(cfg);
  require(param_grad.empty() || param_grad.size() == params.size(), "backward: gradient buffer size mismatch");
  require(dlogits.rows == acts.logits.rows && dlogits.cols == acts.logits.cols, "backward: dlogits shape mismatch");
  const Views v{params.values().data(), param_grad.empty() ? nullptr : param_grad.data()};
  if (port_grads) port_grads->assign(g.ports.size(), Mat());

  Mat dy;
  if (v.grad) accumulate_outer(acts.final_y, dlogits, v.gw(L.wu, cfg.d_model, cfg.vocab_size));
  matmul_transposed(dlogits, v.w(L.wu, cfg.d_model, cfg.vocab_size), dy);
  Mat din;
  layer_norm_backward(dy, acts.final_ln, v.p(L.lnf_g), v.g(L.lnf_g), v.g(L.lnf_b), din);
  if (port_grads) (*port_grads)[static_cast<std::size_t>(g.logits_port())] = din;

  // Running sum of port-input gradients of every port downstream of the current node.
  Mat downstream = din;
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const auto& PL = L.layers[static_cast<std::size_t>(l)];
    mlp_backward(cfg, PL, v, acts.mlps[static_cast<std::size_t>(l)], downstream, din);
    if (port_grads) (*port_grads)[static_cast<std::size_t>(g.mlp_port(l))] = din;
    add_inplace(downstream, din);

    const Mat head_dout = downstream;
    for (int h = 0; h < cfg.n_heads; ++h) {
      Mat dports[3];
      head_backward(cfg, PL, v, h, acts.heads[static_cast<std::size_t>(l * cfg.n_heads + h)], head_dout, dports);
      for (int p = 0; p < 3; ++p) {
        add_inplace(downstream, dports[p]);
        if (port_grads) (*port_grads)[static_cast<std::size_t>(g.head_port(l, h, static_cast<PortKind>(p)))] = std::move(dports[p]);
      }
    }
  }

  if (v.grad) {
    const int d = cfg.d_model;
    for (std::size_t t = 0; t < acts.tokens.size(); ++t) {
      double* te = v.grad + L.wte + static_cast<std::size_t>(acts.tokens[t]) * d;
      double* pe = v.grad + L.wpe + t * d;
      const double* r = downstream.row(static_cast<int>(t));
      for (int j = 0; j < d; ++j) {
        te[j] += r[j];
        pe[j] += r[j];
      }
    }
  }
}

}  // namespace cc
