#pragma once

// Computational DAG, edge attribution (EAP / EAP-IG), edge-level patching and circuit
// selection.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "concept_circuits/concept_kb.hpp"
#include "concept_circuits/model.hpp"
#include "concept_circuits/train.hpp"
#include "concept_circuits/vocab.hpp"

namespace cc {

struct CompEdge {
  int id = 0;
  int src = 0;   // node id
  int dst = 0;   // node id
  int port = 0;  // port id
  PortKind kind = PortKind::In;
};

/// The model's computational DAG with an explicit edge list. Edge ids match
/// GraphLayout::edge_id, so masks indexed by edge id can be handed to the patched forward.
struct CompGraph {
  GraphLayout layout;
  std::vector<CompEdge> edges;

  static CompGraph build(const ModelConfig& cfg);
  int node_count() const { return static_cast<int>(layout.nodes.size()); }
  int edge_count() const { return static_cast<int>(edges.size()); }
  std::string edge_name(int edge) const;  // e.g. "a0.h1->m2" or "embed->a1.h0.q"
};

/// Node count 2 + L(H+1).
int expected_node_count(int n_layers, int n_heads);
/// Closed form of the edge count: every head port sees embed plus all earlier-layer
/// nodes, an MLP additionally sees its own layer's heads, and logits see everything.
int expected_edge_count(int n_layers, int n_heads);

struct CorruptPair {
  TokenSeq clean;    // BOS + prefix
  TokenSeq corrupt;  // same, subject token swapped
  int target = 0;    // first target token id
  int metric_pos = 0;
  int triple_id = -1;
  int concept_id = -1;
};

/// Swaps every occurrence of the subject's name token for a uniformly drawn different
/// concept (same split) whose name is in the vocabulary. Deterministic in (sample, seed).
CorruptPair make_corrupted_pair(const Sample& sample, const KnowledgeBase& kb, const Vocabulary& vocab,
                                std::uint64_t seed);

std::vector<CorruptPair> make_concept_pairs(std::span<const Sample> samples, const KnowledgeBase& kb,
                                            const Vocabulary& vocab, std::uint64_t seed);

/// The attribution metric: target logit at the metric position.
double pair_metric(const Activations& acts, const CorruptPair& pair);

struct AttributionOptions {
  int m = 5;                  // interpolation steps
  double metric_scale = 1.0;  // M is scaled by this constant (linearity checks)
};

/// EAP-IG: score(u -> v.port) = sum over positions of (a_u^corrupt - a_u^clean) . mean_k dM/d(in_port),
/// with the gradient taken at inputs interpolated as (1 - k/m) clean + (k/m) corrupt, k = 1..m.
std::vector<double> eap_ig_edge_scores(const Parameters& params, const CorruptPair& pair,
                                       const AttributionOptions& options = {});

/// Plain EAP: same product with a single gradient at the corrupted run.
std::vector<double> eap_edge_scores(const Parameters& params, const CorruptPair& pair, double metric_scale = 1.0);

/// Per-edge mean of signed scores.
std::vector<double> aggregate_concept_scores(std::span<const std::vector<double>> per_sample);

/// Mean EAP-IG scores over pairs; pairs are scored in parallel and reduced in pair order.
std::vector<double> concept_edge_scores(const Parameters& params, std::span<const CorruptPair> pairs,
                                        const AttributionOptions& options = {});

namespace reference {
std::vector<double> concept_edge_scores(const Parameters& params, std::span<const CorruptPair> pairs,
                                        const AttributionOptions& options = {});
}  // namespace reference

/// A pair with its clean/corrupted runs cached for repeated patched evaluations.
struct PreparedPair {
  CorruptPair pair;
  Activations corrupt_acts;
  double clean_metric = 0.0;
  double corrupt_metric = 0.0;
};

PreparedPair prepare_pair(const Parameters& params, const CorruptPair& pair);

/// Forward with every edge whose mask entry is 0 reading the corrupted run's source output.
double run_with_circuit(const Parameters& params, std::span<const char> edge_on, const PreparedPair& pair);
double run_with_circuit(const Parameters& params, std::span<const char> edge_on, const CorruptPair& pair);

struct FaithfulnessOptions {
  bool raw_ratio = false;  // M_circuit / M_clean instead of the clean-corrupt normalised ratio
  double degenerate_eps = 1e-9;
};

struct FaithfulnessReport {
  double value = 0.0;
  int used_pairs = 0;
  int excluded_pairs = 0;
};

/// Mean over pairs of the per-pair recovered fraction, each clamped to [0, 1]. Pairs with a
/// clean-corrupt gap below eps are excluded and counted; throws if none remain.
FaithfulnessReport faithfulness(const Parameters& params, std::span<const char> edge_on,
                                std::span<const PreparedPair> pairs, const FaithfulnessOptions& options = {});

struct ExtractOptions {
  double threshold = 0.70;
  AttributionOptions attribution;
  FaithfulnessOptions faithfulness;
  bool linear_scan = false;  // exhaustive smallest-k search instead of binary search
};

struct Circuit {
  int concept_id = -1;
  std::string checkpoint;
  int n_layers = 0;
  int n_heads = 0;
  double threshold = 0.70;
  int m = 5;
  int k_edges = 0;
  double faithfulness = 0.0;
  int excluded_pairs = 0;
  bool unfaithful = false;  // even the full graph missed the threshold
  bool degenerate = false;  // every pair had a zero clean-corrupt gap
  bool reaches_logits = false;
  std::vector<int> edges;       // selected edge ids in rank order
  std::vector<double> scores;   // aggregated score of every edge, indexed by edge id
  std::vector<char> mask(int edge_count) const;
};

/// Edge ids ordered by |score| descending, ties by ascending id.
std::vector<int> rank_edges(std::span<const double> scores);
std::vector<char> prefix_mask(std::span<const int> ranking, int k, int edge_count);

/// True when a directed path embed -> logits exists using only masked-in edges.
bool circuit_reaches_logits(const CompGraph& graph, std::span<const char> edge_on);

/// Scores the concept's pairs, ranks edges and picks the smallest top-k prefix whose
/// faithfulness meets the threshold.
Circuit extract_circuit(const Parameters& params, std::span<const CorruptPair> pairs, const ExtractOptions& options = {});
/// Same, with precomputed aggregated scores.
Circuit select_circuit(const Parameters& params, std::span<const double> scores, std::span<const PreparedPair> pairs,
                       const ExtractOptions& options = {});

void save_circuit(const std::filesystem::path& path, const Circuit& c, const CompGraph& graph);
Circuit load_circuit(const std::filesystem::path& path);

}  // namespace cc
