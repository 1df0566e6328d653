#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

#include "concept_circuits/circuit.hpp"
#include "concept_circuits/common.hpp"

namespace cc {

CompGraph CompGraph::build(const ModelConfig& cfg) {
  CompGraph g;
  g.layout = GraphLayout::make(cfg);
  g.edges.reserve(static_cast<std::size_t>(g.layout.edge_count));
  for (const auto& port : g.layout.ports) {
    for (int u = 0; u < port.upstream; ++u) {
      g.edges.push_back({port.edge_base + u, u, port.node, port.id, port.kind});
    }
  }
  if (g.node_count() != expected_node_count(cfg.n_layers, cfg.n_heads) ||
      g.edge_count() != expected_edge_count(cfg.n_layers, cfg.n_heads)) {
    throw Error("computational graph size does not match its closed form");
  }
  return g;
}

std::string CompGraph::edge_name(int edge) const {
  const CompEdge& e = edges.at(static_cast<std::size_t>(edge));
  std::string s = node_name(layout.nodes[static_cast<std::size_t>(e.src)]) + "->" +
                  node_name(layout.nodes[static_cast<std::size_t>(e.dst)]);
  if (e.kind != PortKind::In) s += "." + port_name(e.kind);
  return s;
}

int expected_node_count(int n_layers, int n_heads) { return 2 + n_layers * (n_heads + 1); }

int expected_edge_count(int n_layers, int n_heads) {
  int total = 0;
  for (int l = 0; l < n_layers; ++l) {
    const int before_layer = 1 + l * (n_heads + 1);
    total += 3 * n_heads * before_layer;  // q/k/v of each head
    total += before_layer + n_heads;      // mlp input
  }
  return total + 1 + n_layers * (n_heads + 1);  // logits
}

CorruptPair make_corrupted_pair(const Sample& sample, const KnowledgeBase& kb, const Vocabulary& vocab,
                                std::uint64_t seed) {
  if (kb.concepts.size() < 2) throw InvalidArgument("corruption needs at least 2 concepts in the knowledge base");
  require(sample.concept_id >= 0 && static_cast<std::size_t>(sample.concept_id) < kb.concepts.size(),
          "sample " + std::to_string(sample.triple_id) + " refers to an unknown concept");
  const Concept& subject = kb.concepts[static_cast<std::size_t>(sample.concept_id)];
  if (!vocab.contains(subject.fictional_name)) {
    throw InvalidArgument("concept name '" + subject.fictional_name + "' is not a vocabulary token");
  }
  const int subject_id = vocab.id(subject.fictional_name);

  CorruptPair p;
  p.triple_id = sample.triple_id;
  p.concept_id = sample.concept_id;
  p.clean.push_back(Vocabulary::kBos);
  for (int id : vocab.encode(sample.prefix)) p.clean.push_back(id);
  p.metric_pos = static_cast<int>(p.clean.size()) - 1;
  const auto target = vocab.encode(sample.target);
  require(!target.empty(), "sample " + std::to_string(sample.triple_id) + " has an empty target");
  p.target = target.front();
  if (std::find(p.clean.begin(), p.clean.end(), subject_id) == p.clean.end()) {
    throw InvalidArgument("sample " + std::to_string(sample.triple_id) + ": subject token not found in prefix");
  }

  std::vector<int> candidates;
  for (const auto& c : kb.concepts) {
    if (c.id != subject.id && c.split == subject.split && vocab.contains(c.fictional_name)) {
      candidates.push_back(vocab.id(c.fictional_name));
    }
  }
  if (candidates.empty()) {
    throw InvalidArgument("no replacement concept shares the split of concept " + std::to_string(subject.id));
  }
  const auto stream = static_cast<std::uint64_t>(sample.triple_id) * 1000003ULL + static_cast<std::uint64_t>(sample.template_id);
  std::mt19937_64 rng(mix_seed(seed, stream));
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  const int replacement = candidates[pick(rng)];

  p.corrupt = p.clean;
  for (int& t : p.corrupt) {
    if (t == subject_id) t = replacement;
  }
  return p;
}

std::vector<CorruptPair> make_concept_pairs(std::span<const Sample> samples, const KnowledgeBase& kb,
                                            const Vocabulary& vocab, std::uint64_t seed) {
  std::vector<CorruptPair> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(make_corrupted_pair(s, kb, vocab, seed));
  return out;
}

std::vector<int> rank_edges(std::span<const double> scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(scores[static_cast<std::size_t>(a)]) > std::abs(scores[static_cast<std::size_t>(b)]);
  });
  return order;
}

std::vector<char> prefix_mask(std::span<const int> ranking, int k, int edge_count) {
  require(k >= 0 && static_cast<std::size_t>(k) <= ranking.size(), "prefix_mask: k out of range");
  std::vector<char> mask(static_cast<std::size_t>(edge_count), 0);
  for (int i = 0; i < k; ++i) mask[static_cast<std::size_t>(ranking[static_cast<std::size_t>(i)])] = 1;
  return mask;
}

std::vector<char> Circuit::mask(int edge_count) const {
  std::vector<char> out(static_cast<std::size_t>(edge_count), 0);
  for (int e : edges) {
    require(e >= 0 && e < edge_count, "circuit edge id " + std::to_string(e) + " out of range");
    out[static_cast<std::size_t>(e)] = 1;
  }
  return out;
}

bool circuit_reaches_logits(const CompGraph& graph, std::span<const char> edge_on) {
  // Edges run from lower to higher node ids, so one ascending sweep suffices.
  std::vector<char> reach(static_cast<std::size_t>(graph.node_count()), 0);
  reach[0] = 1;
  std::vector<CompEdge> sorted = graph.edges;
  std::stable_sort(sorted.begin(), sorted.end(), [](const CompEdge& a, const CompEdge& b) { return a.dst < b.dst; });
  for (const auto& e : sorted) {
    if (edge_on[static_cast<std::size_t>(e.id)] && reach[static_cast<std::size_t>(e.src)]) {
      reach[static_cast<std::size_t>(e.dst)] = 1;
    }
  }
  return reach[static_cast<std::size_t>(graph.layout.logits())] != 0;
}

void save_circuit(const std::filesystem::path& path, const Circuit& c, const CompGraph& graph) {
  using nlohmann::json;
  json edges = json::array();
  for (int e : c.edges) {
    const CompEdge& ce = graph.edges.at(static_cast<std::size_t>(e));
    edges.push_back({{"id", e},
                     {"src", node_name(graph.layout.nodes[static_cast<std::size_t>(ce.src)])},
                     {"dst", node_name(graph.layout.nodes[static_cast<std::size_t>(ce.dst)])},
                     {"port", port_name(ce.kind)},
                     {"score", c.scores.at(static_cast<std::size_t>(e))}});
  }
  json j = {{"concept_id", c.concept_id},
            {"checkpoint", c.checkpoint},
            {"n_layers", c.n_layers},
            {"n_heads", c.n_heads},
            {"threshold", c.threshold},
            {"m", c.m},
            {"k_edges", c.k_edges},
            {"faithfulness", c.faithfulness},
            {"excluded_pairs", c.excluded_pairs},
            {"unfaithful", c.unfaithful},
            {"degenerate", c.degenerate},
            {"reaches_logits", c.reaches_logits},
            {"edges", edges},
            {"all_scores", c.scores}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(1) << "\n";
}

Circuit load_circuit(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open circuit file " + path.string());
  Circuit c;
  try {
    const auto j = nlohmann::json::parse(is);
    c.concept_id = j.at("concept_id").get<int>();
    c.checkpoint = j.at("checkpoint").get<std::string>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.threshold = j.at("threshold").get<double>();
    c.m = j.at("m").get<int>();
    c.k_edges = j.at("k_edges").get<int>();
    c.faithfulness = j.at("faithfulness").get<double>();
    c.excluded_pairs = j.value("excluded_pairs", 0);
    c.unfaithful = j.value("unfaithful", false);
    c.degenerate = j.value("degenerate", false);
    c.reaches_logits = j.value("reaches_logits", false);
    for (const auto& e : j.at("edges")) c.edges.push_back(e.at("id").get<int>());
    c.scores = j.value("all_scores", std::vector<double>{});
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("bad circuit file " + path.string() + ": " + e.what());
  }
  if (static_cast<int>(c.edges.size()) != c.k_edges) {
    throw InvalidArgument("circuit file " + path.string() + ": k_edges does not match the edge list");
  }
  const int n_edges = expected_edge_count(c.n_layers, c.n_heads);
  for (int e : c.edges) {
    if (e < 0 || e >= n_edges) throw InvalidArgument("circuit file " + path.string() + ": edge id out of range");
  }
  return c;
}

}  // namespace cc
