#include <algorithm>
#include <cmath>

#include "concept_circuits/common.hpp"
#include "concept_circuits/parallel.hpp"
#include "concept_circuits/train.hpp"

namespace cc {

namespace {

double log_softmax_at(const double* row, int n, int idx) {
  const double mx = *std::max_element(row, row + n);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
  return row[idx] - mx - std::log(sum);
}

KnowledgeRecord probe_record(const Parameters& params, const Vocabulary& vocab, const Sample& s) {
  const ProbeInput in = make_probe(vocab, s, params.config().context_len);
  const Activations acts = forward(params, in.tokens);
  const int vocab_n = acts.logits.cols;
  KnowledgeRecord r;
  r.triple_id = s.triple_id;
  r.concept_id = s.concept_id;
  r.category = s.category;
  r.valid = in.valid;
  const double* row = acts.logits.row(in.prefix_len - 1);
  const int first = in.tokens[static_cast<std::size_t>(in.prefix_len)];
  r.logit = row[first];
  r.prob = std::exp(log_softmax_at(row, vocab_n, first));
  const int n_target = static_cast<int>(in.tokens.size()) - in.prefix_len;
  double lp = 0.0;
  for (int j = 0; j < n_target; ++j) {
    const int pos = in.prefix_len - 1 + j;
    lp += log_softmax_at(acts.logits.row(pos), vocab_n, in.tokens[static_cast<std::size_t>(pos + 1)]);
  }
  r.logprob = lp / n_target;
  return r;
}

}  // namespace

ProbeInput make_probe(const Vocabulary& vocab, const Sample& sample, int context_len) {
  ProbeInput p;
  p.tokens.push_back(Vocabulary::kBos);
  for (int id : vocab.encode(sample.prefix)) p.tokens.push_back(id);
  p.prefix_len = static_cast<int>(p.tokens.size());
  const auto target = vocab.encode(sample.target);
  if (target.empty()) throw InvalidArgument("sample " + std::to_string(sample.triple_id) + " has an empty target");
  if (p.prefix_len + 1 > context_len) {
    throw InvalidArgument("sample " + std::to_string(sample.triple_id) + ": prefix does not fit the context length");
  }
  for (int id : target) {
    if (static_cast<int>(p.tokens.size()) == context_len) break;
    p.tokens.push_back(id);
  }
  p.valid = target.front() != Vocabulary::kUnk;
  return p;
}

double target_logit(const Parameters& params, const Sample& sample, const Vocabulary& vocab) {
  return probe_record(params, vocab, sample).logit;
}

double target_logprob(const Parameters& params, const Sample& sample, const Vocabulary& vocab) {
  return probe_record(params, vocab, sample).logprob;
}

std::vector<KnowledgeRecord> evaluate_knowledge(const Parameters& params, const Vocabulary& vocab,
                                                std::span<const Sample> samples) {
  std::vector<KnowledgeRecord> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { out[i] = probe_record(params, vocab, samples[i]); });
  return out;
}

namespace reference {

std::vector<KnowledgeRecord> evaluate_knowledge(const Parameters& params, const Vocabulary& vocab,
                                                std::span<const Sample> samples) {
  std::vector<KnowledgeRecord> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(probe_record(params, vocab, s));
  return out;
}

}  // namespace reference

}  // namespace cc
