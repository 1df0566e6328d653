#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "concept_circuits/common.hpp"
#include "concept_circuits/parallel.hpp"
#include "concept_circuits/train.hpp"

namespace cc {

namespace {

constexpr std::size_t kGradGroups = 8;

std::size_t count_predictions(std::span<const TokenSeq> batch) {
  std::size_t n = 0;
  for (const auto& seq : batch) {
    if (seq.size() < 2) throw InvalidArgument("loss_and_grads: every sequence needs at least 2 tokens");
    for (std::size_t t = 1; t < seq.size(); ++t) n += seq[t] != Vocabulary::kPad;
  }
  if (n == 0) throw InvalidArgument("loss_and_grads: batch has no non-PAD prediction targets");
  return n;
}

// Returns the summed (unnormalised) loss of one sequence and accumulates grads / n_total.
double sequence_loss_and_grad(const Parameters& params, const TokenSeq& seq, double n_total, std::span<double> grad) {
  const Activations acts = forward(params, seq);
  const int t_len = static_cast<int>(seq.size());
  const int vocab = acts.logits.cols;
  Mat dlogits(t_len, vocab);
  double loss = 0.0;
  for (int t = 0; t + 1 < t_len; ++t) {
    const int target = seq[static_cast<std::size_t>(t + 1)];
    if (target == Vocabulary::kPad) continue;
    const double* row = acts.logits.row(t);
    const double mx = *std::max_element(row, row + vocab);
    double sum = 0.0;
    for (int j = 0; j < vocab; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    loss += lse - row[target];
    double* d = dlogits.row(t);
    for (int j = 0; j < vocab; ++j) d[j] = std::exp(row[j] - lse) / n_total;
    d[target] -= 1.0 / n_total;
  }
  backward(params, acts, dlogits, grad);
  return loss;
}

}  // namespace

LossAndGrads loss_and_grads(const Parameters& params, std::span<const TokenSeq> batch) {
  const std::size_t n_pred = count_predictions(batch);
  const std::size_t groups = std::min(kGradGroups, batch.size());
  std::vector<std::vector<double>> group_grads(groups, std::vector<double>(params.size(), 0.0));
  std::vector<double> group_loss(groups, 0.0);
  const double n_total = static_cast<double>(n_pred);

  parallel_for(groups, [&](std::size_t g) {
    const std::size_t lo = g * batch.size() / groups;
    const std::size_t hi = (g + 1) * batch.size() / groups;
    for (std::size_t i = lo; i < hi; ++i) {
      group_loss[g] += sequence_loss_and_grad(params, batch[i], n_total, group_grads[g]);
    }
  });

  LossAndGrads out;
  out.predictions = n_pred;
  out.grads = std::move(group_grads[0]);
  double loss = group_loss[0];
  for (std::size_t g = 1; g < groups; ++g) {
    loss += group_loss[g];
    for (std::size_t i = 0; i < out.grads.size(); ++i) out.grads[i] += group_grads[g][i];
  }
  out.loss = loss / n_total;
  return out;
}

namespace reference {

LossAndGrads loss_and_grads(const Parameters& params, std::span<const TokenSeq> batch) {
  const std::size_t n_pred = count_predictions(batch);
  LossAndGrads out;
  out.predictions = n_pred;
  out.grads.assign(params.size(), 0.0);
  double loss = 0.0;
  for (const auto& seq : batch) loss += sequence_loss_and_grad(params, seq, static_cast<double>(n_pred), out.grads);
  out.loss = loss / static_cast<double>(n_pred);
  return out;
}

}  // namespace reference

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Init: return "init";
    case Stage::Stage1: return "stage1";
    case Stage::Stage2: return "stage2";
  }
  return "init";
}

Stage parse_stage(std::string_view s) {
  if (s == "init") return Stage::Init;
  if (s == "stage1") return Stage::Stage1;
  if (s == "stage2") return Stage::Stage2;
  throw InvalidArgument("unknown stage '" + std::string(s) + "'");
}

std::vector<Checkpoint> train_stage(const Parameters& init, std::span<const TokenSeq> dataset,
                                    const TrainConfig& config, Stage stage) {
  require(!dataset.empty(), "train_stage: dataset is empty");
  require(config.batch_size >= 1, "train_stage: batch_size must be >= 1");
  require(config.steps >= 0, "train_stage: steps must be >= 0");
  require(config.checkpoint_every >= 0, "train_stage: checkpoint_every must be >= 0");

  Parameters params = init;
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);
  std::mt19937_64 rng(mix_seed(config.seed, 0x7472));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  std::vector<TokenSeq> batch;
  auto next_batch = [&] {
    batch.clear();
    for (int i = 0; i < config.batch_size; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(dataset[order[cursor++]]);
    }
  };

  std::vector<Checkpoint> out;
  auto snapshot = [&](int step, double loss) {
    out.push_back(Checkpoint{std::make_shared<const Parameters>(params), stage, step, loss});
  };

  if (config.steps == 0) {
    next_batch();
    snapshot(0, loss_and_grads(params, batch).loss);
    return out;
  }

  auto values = params.values();
  for (int step = 0; step < config.steps; ++step) {
    next_batch();
    const LossAndGrads lg = loss_and_grads(params, batch);
    if (!std::isfinite(lg.loss)) throw NumericError("train_stage: non-finite loss at step " + std::to_string(step));
    if (step == 0) snapshot(0, lg.loss);

    const double t = step + 1;
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = lg.grads[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= config.lr * (mhat / (std::sqrt(vhat) + config.eps) + config.weight_decay * values[i]);
    }

    const int done = step + 1;
    const bool periodic = config.checkpoint_every > 0 && done % config.checkpoint_every == 0;
    if (periodic || done == config.steps) snapshot(done, lg.loss);
  }
  return out;
}

TokenSeq encode_training_text(const Vocabulary& vocab, std::string_view text, int context_len) {
  TokenSeq seq{Vocabulary::kBos};
  for (int id : vocab.encode(text)) seq.push_back(id);
  if (static_cast<int>(seq.size()) > context_len) seq.resize(static_cast<std::size_t>(context_len));
  return seq;
}

std::vector<TokenSeq> encode_samples(const Vocabulary& vocab, std::span<const Sample> samples, int context_len) {
  std::vector<TokenSeq> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(encode_training_text(vocab, s.prefix + s.target, context_len));
  return out;
}

std::vector<TokenSeq> encode_texts(const Vocabulary& vocab, std::span<const std::string> texts, int context_len) {
  std::vector<TokenSeq> out;
  out.reserve(texts.size());
  for (const auto& s : texts) out.push_back(encode_training_text(vocab, s, context_len));
  return out;
}

}  // namespace cc
