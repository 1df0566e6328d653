#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "concept_circuits/concept_kb.hpp"
#include "concept_circuits/model.hpp"
#include "concept_circuits/vocab.hpp"

namespace cc {

using TokenSeq = std::vector<int>;

struct LossAndGrads {
  double loss = 0.0;
  std::size_t predictions = 0;
  std::vector<double> grads;
};

/// Mean next-token cross-entropy over every predicted position whose target is not PAD,
/// with exact reverse-mode gradients. Sequences are processed in fixed-size groups in
/// parallel and reduced in group order, so the result does not depend on thread count.
LossAndGrads loss_and_grads(const Parameters& params, std::span<const TokenSeq> batch);

namespace reference {
/// Serial reference for loss_and_grads: one sequence at a time into a single buffer.
LossAndGrads loss_and_grads(const Parameters& params, std::span<const TokenSeq> batch);
}  // namespace reference

struct TrainConfig {
  double lr = 5e-5;
  int batch_size = 128;
  int steps = 0;
  int checkpoint_every = 0;  // 0: only initial and final checkpoints
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

enum class Stage { Init, Stage1, Stage2 };
std::string_view stage_name(Stage s);
Stage parse_stage(std::string_view s);

struct Checkpoint {
  std::shared_ptr<const Parameters> params;
  Stage stage = Stage::Init;
  int step = 0;
  double loss = 0.0;  // mean loss of the most recent batch (measured before its update)
};

/// AdamW over shuffled mini-batches (reshuffled each pass over the data). Emits a
/// checkpoint at step 0, every `checkpoint_every` steps, and at the final step.
std::vector<Checkpoint> train_stage(const Parameters& init, std::span<const TokenSeq> dataset,
                                    const TrainConfig& config, Stage stage);

/// BOS + prefix + target, truncated to the context length.
TokenSeq encode_training_text(const Vocabulary& vocab, std::string_view text, int context_len);
std::vector<TokenSeq> encode_samples(const Vocabulary& vocab, std::span<const Sample> samples, int context_len);
std::vector<TokenSeq> encode_texts(const Vocabulary& vocab, std::span<const std::string> texts, int context_len);

// ---------------------------------------------------------------------------
// Checkpoint files

inline constexpr char kCheckpointMagic[8] = {'C', 'C', 'K', 'P', 'T', '0', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Binary parameter container only (no sidecar).
void save_parameters(const std::filesystem::path& path, const Parameters& params);
Parameters load_parameters(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Knowledge probing

struct KnowledgeRecord {
  int triple_id = 0;
  int concept_id = 0;
  Category category = Category::Excluded;
  double logit = 0.0;    // first target token at the last prefix position
  double prob = 0.0;     // softmax probability of that token
  double logprob = 0.0;  // mean log-probability over all target tokens
  bool valid = true;     // false when the first target token is UNK
};

struct ProbeInput {
  TokenSeq tokens;  // BOS + prefix + target
  int prefix_len = 0;
  bool valid = true;
};

ProbeInput make_probe(const Vocabulary& vocab, const Sample& sample, int context_len);

double target_logit(const Parameters& params, const Sample& sample, const Vocabulary& vocab);
double target_logprob(const Parameters& params, const Sample& sample, const Vocabulary& vocab);

/// One record per sample, evaluated in parallel.
std::vector<KnowledgeRecord> evaluate_knowledge(const Parameters& params, const Vocabulary& vocab,
                                                std::span<const Sample> samples);

namespace reference {
std::vector<KnowledgeRecord> evaluate_knowledge(const Parameters& params, const Vocabulary& vocab,
                                                std::span<const Sample> samples);
}  // namespace reference

}  // namespace cc
