#include <cmath>
#include <filesystem>
#include <queue>
#include <random>
#include <set>

#include "../support/fixtures.hpp"
#include "concept_circuits/circuit.hpp"
#include "concept_circuits/common.hpp"
#include "doctest.h"

using namespace cc;

namespace {

CorruptPair pair_for(const std::vector<int>& clean, int swap_pos, int replacement, int target) {
  CorruptPair p;
  p.clean = clean;
  p.corrupt = clean;
  p.corrupt[static_cast<std::size_t>(swap_pos)] = replacement;
  p.target = target;
  p.metric_pos = static_cast<int>(clean.size()) - 1;
  return p;
}

// Edge list written out from the connectivity rule, independent of GraphLayout.
std::vector<std::pair<int, int>> enumerate_edges(int L, int H) {
  auto head = [H](int l, int h) { return 1 + l * (H + 1) + h; };
  auto mlp = [H](int l) { return 1 + l * (H + 1) + H; };
  const int logits = 1 + L * (H + 1);
  std::vector<std::pair<int, int>> e;
  auto upstream_of_layer = [&](int l) {
    std::vector<int> u = {0};
    for (int j = 0; j < l; ++j) {
      for (int h = 0; h < H; ++h) u.push_back(head(j, h));
      u.push_back(mlp(j));
    }
    return u;
  };
  for (int l = 0; l < L; ++l) {
    const auto u = upstream_of_layer(l);
    for (int h = 0; h < H; ++h) {
      for (int port = 0; port < 3; ++port) {
        for (int s : u) e.emplace_back(s, head(l, h));
      }
    }
    auto um = u;
    for (int h = 0; h < H; ++h) um.push_back(head(l, h));
    for (int s : um) e.emplace_back(s, mlp(l));
  }
  for (int s : upstream_of_layer(L)) e.emplace_back(s, logits);
  return e;
}

struct Toy {
  ModelConfig cfg = fixture::tiny_config(2, 2, 8, 12, 8, 10);
  Parameters params = fixture::random_parameters(cfg, 21, 0.4);
  std::vector<CorruptPair> pairs = {pair_for({1, 3, 4, 5, 6}, 1, 7, 8), pair_for({1, 4, 3, 9, 6}, 2, 7, 5),
                                    pair_for({1, 3, 6, 6}, 1, 9, 4)};
};

}  // namespace

TEST_CASE("edge counts match enumeration and the closed form") {
  for (int L = 1; L <= 4; ++L) {
    for (int H = 1; H <= 4; ++H) {
      auto cfg = fixture::tiny_config(L, H, 4 * H, 4, 4, 5);
      const auto g = CompGraph::build(cfg);
      const auto expect = enumerate_edges(L, H);
      REQUIRE(g.edge_count() == static_cast<int>(expect.size()));
      CHECK(expected_edge_count(L, H) == g.edge_count());
      CHECK(g.node_count() == 2 + L * (H + 1));
      for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(g.edges[i].id == static_cast<int>(i));
        CHECK(g.edges[i].src == expect[i].first);
        CHECK(g.edges[i].dst == expect[i].second);
      }
    }
  }
  CHECK(expected_edge_count(1, 1) == 8);
  CHECK(expected_edge_count(4, 4) == 479);
}

TEST_CASE("identical clean and corrupted inputs give all-zero scores") {
  Toy t;
  auto p = t.pairs[0];
  p.corrupt = p.clean;
  for (double s : eap_ig_edge_scores(t.params, p)) CHECK(s == 0.0);
  for (double s : eap_edge_scores(t.params, p)) CHECK(s == 0.0);
}

TEST_CASE("patching with all edges or none reproduces the clean and corrupted metrics") {
  Toy t;
  const int E = CompGraph::build(t.cfg).edge_count();
  const std::vector<char> all(static_cast<std::size_t>(E), 1), none(static_cast<std::size_t>(E), 0);
  for (const auto& p : t.pairs) {
    const auto prep = prepare_pair(t.params, p);
    CHECK(std::abs(run_with_circuit(t.params, all, p) - prep.clean_metric) <= 1e-12);
    CHECK(std::abs(run_with_circuit(t.params, none, p) - prep.corrupt_metric) <= 1e-12);
    CHECK(prep.clean_metric != prep.corrupt_metric);
  }
}

TEST_CASE("EAP-IG with one step equals plain EAP") {
  Toy t;
  AttributionOptions o;
  o.m = 1;
  for (const auto& p : t.pairs) {
    const auto a = eap_ig_edge_scores(t.params, p, o);
    const auto b = eap_edge_scores(t.params, p);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
  }
}

TEST_CASE("EAP scores equal a finite-difference directional derivative") {
  // score(u -> port) = d/de M(corrupt run with port input += e * (a_u^corr - a_u^clean)).
  Toy t;
  const auto g = CompGraph::build(t.cfg);
  const auto& p = t.pairs[0];
  const auto scores = eap_edge_scores(t.params, p);
  const auto clean = forward(t.params, p.clean);
  const auto corrupt = forward(t.params, p.corrupt);
  const double h = 1e-5;
  int checked = 0;
  for (const auto& e : g.edges) {
    Mat d = corrupt.node_out[static_cast<std::size_t>(e.src)];
    for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] -= clean.node_out[static_cast<std::size_t>(e.src)].data[i];
    Mat up = d, dn = d;
    for (double& x : up.data) x *= h;
    for (double& x : dn.data) x *= -h;
    ForwardOptions fo;
    fo.perturb = {e.port, &up};
    const double mu = pair_metric(forward(t.params, p.corrupt, fo), p);
    fo.perturb = {e.port, &dn};
    const double md = pair_metric(forward(t.params, p.corrupt, fo), p);
    const double fd = (mu - md) / (2 * h);
    CHECK(std::abs(fd - scores[static_cast<std::size_t>(e.id)]) <= 1e-6 * std::max(1.0, std::abs(fd)));
    ++checked;
  }
  CHECK(checked == g.edge_count());
}

TEST_CASE("scores are linear in the metric scale") {
  Toy t;
  AttributionOptions a, b;
  b.metric_scale = -2.5;
  const auto s1 = eap_ig_edge_scores(t.params, t.pairs[1], a);
  const auto s2 = eap_ig_edge_scores(t.params, t.pairs[1], b);
  for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s2[i] == doctest::Approx(-2.5 * s1[i]).epsilon(1e-12));
}

TEST_CASE("parallel concept scores equal the serial reference") {
  Toy t;
  const auto a = concept_edge_scores(t.params, t.pairs);
  const auto b = reference::concept_edge_scores(t.params, t.pairs);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("faithfulness clamps per pair and excludes degenerate pairs") {
  Toy t;
  const int E = CompGraph::build(t.cfg).edge_count();
  std::vector<PreparedPair> prep;
  for (const auto& p : t.pairs) prep.push_back(prepare_pair(t.params, p));
  const std::vector<char> all(static_cast<std::size_t>(E), 1), none(static_cast<std::size_t>(E), 0);
  CHECK(faithfulness(t.params, all, prep).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(faithfulness(t.params, none, prep).value == doctest::Approx(0.0).epsilon(1e-12));

  // A pair whose clean and corrupted metrics coincide is excluded.
  auto same = t.pairs[0];
  same.corrupt = same.clean;
  prep.push_back(prepare_pair(t.params, same));
  const auto r = faithfulness(t.params, all, prep);
  CHECK(r.used_pairs == 3);
  CHECK(r.excluded_pairs == 1);
  const std::vector<PreparedPair> only_degenerate = {prep.back()};
  CHECK_THROWS_AS(faithfulness(t.params, all, only_degenerate), InvalidArgument);

  // Per-pair values stay in [0, 1] for arbitrary masks.
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<char> mask(static_cast<std::size_t>(E));
    for (auto& m : mask) m = coin(rng);
    for (std::size_t i = 0; i < 3; ++i) {
      const std::vector<PreparedPair> one = {prep[i]};
      const double f = faithfulness(t.params, mask, one).value;
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
    }
  }
}

TEST_CASE("selection returns the smallest prefix meeting the threshold") {
  Toy t;
  const auto scores = concept_edge_scores(t.params, t.pairs);
  std::vector<PreparedPair> prep;
  for (const auto& p : t.pairs) prep.push_back(prepare_pair(t.params, p));
  const int E = static_cast<int>(scores.size());
  const auto ranking = rank_edges(scores);
  auto f = [&](int k) { return faithfulness(t.params, prefix_mask(ranking, k, E), prep).value; };

  ExtractOptions lin;
  lin.linear_scan = true;
  const Circuit a = select_circuit(t.params, scores, prep, lin);
  REQUIRE_FALSE(a.unfaithful);
  CHECK(f(a.k_edges) >= 0.7);
  for (int k = 0; k < a.k_edges; ++k) CHECK(f(k) < 0.7);
  CHECK(a.faithfulness == f(a.k_edges));

  const Circuit b = select_circuit(t.params, scores, prep, ExtractOptions{});
  CHECK(f(b.k_edges) >= 0.7);
  if (b.k_edges > 0) CHECK(f(b.k_edges - 1) < 0.7);
  CHECK(b.k_edges >= a.k_edges);

  ExtractOptions zero;
  zero.threshold = 0.0;
  CHECK(select_circuit(t.params, scores, prep, zero).k_edges == 0);

  ExtractOptions full;
  full.threshold = 1.0;
  const Circuit c = select_circuit(t.params, scores, prep, full);
  CHECK(c.k_edges <= E);
  CHECK(c.faithfulness >= 1.0 - 1e-12);
}

TEST_CASE("ranking orders by magnitude with ties broken by id") {
  const std::vector<double> s = {0.5, -2.0, 0.5, 1.0, -0.5};
  CHECK(rank_edges(s) == std::vector<int>{1, 3, 0, 2, 4});
}

TEST_CASE("logit reachability agrees with breadth-first search") {
  const auto cfg = fixture::tiny_config(2, 2, 8, 4, 4, 5);
  const auto g = CompGraph::build(cfg);
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.15);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<char> mask(static_cast<std::size_t>(g.edge_count()));
    for (auto& m : mask) m = coin(rng);
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.node_count()));
    for (const auto& e : g.edges) {
      if (mask[static_cast<std::size_t>(e.id)]) adj[static_cast<std::size_t>(e.src)].push_back(e.dst);
    }
    std::vector<char> seen(adj.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int u : adj[static_cast<std::size_t>(v)]) {
        if (!seen[static_cast<std::size_t>(u)]) {
          seen[static_cast<std::size_t>(u)] = 1;
          q.push(u);
        }
      }
    }
    CHECK(circuit_reaches_logits(g, mask) == static_cast<bool>(seen.back()));
  }
}

TEST_CASE("corrupted pairs swap only the subject token") {
  KnowledgeBase kb;
  for (int i = 0; i < 4; ++i) {
    Concept c;
    c.id = i;
    c.fictional_name = std::string("zorb") + char('a' + i);
    c.split = i < 3 ? ConceptSplit::TrainAndTest : ConceptSplit::TrainOnly;
    kb.concepts.push_back(c);
  }
  const auto vocab =
      Vocabulary::from_tokens({"<pad>", "<bos>", "<unk>", "zorba", "zorbb", "zorbc", "zorbd", "is", "a", "tool", "and"});
  Sample s;
  s.concept_id = 0;
  s.triple_id = 5;
  s.template_id = 2;
  s.prefix = "zorba and zorba is a";
  s.target = " tool";
  const auto p = make_corrupted_pair(s, kb, vocab, 3);
  const auto again = make_corrupted_pair(s, kb, vocab, 3);
  CHECK(again.clean == p.clean);
  CHECK(again.corrupt == p.corrupt);
  CHECK(p.clean.front() == Vocabulary::kBos);
  CHECK(p.metric_pos == static_cast<int>(p.clean.size()) - 1);
  CHECK(p.target == vocab.id("tool"));
  const int subj = vocab.id("zorba");
  std::set<int> replacements;
  for (std::size_t i = 0; i < p.clean.size(); ++i) {
    if (p.clean[i] == subj) {
      replacements.insert(p.corrupt[i]);
    } else {
      CHECK(p.corrupt[i] == p.clean[i]);
    }
  }
  REQUIRE(replacements.size() == 1);
  const int r = *replacements.begin();
  CHECK((r == vocab.id("zorbb") || r == vocab.id("zorbc")));  // same split only
}

TEST_CASE("circuits round-trip through JSON") {
  Toy t;
  const auto g = CompGraph::build(t.cfg);
  Circuit c = extract_circuit(t.params, t.pairs);
  c.checkpoint = "stage1_000010";
  const auto path = std::filesystem::temp_directory_path() / "cc_unit_circuit.json";
  save_circuit(path, c, g);
  const auto back = load_circuit(path);
  CHECK(back.edges == c.edges);
  CHECK(back.k_edges == c.k_edges);
  CHECK(back.scores == c.scores);
  CHECK(back.faithfulness == c.faithfulness);
  CHECK(back.checkpoint == c.checkpoint);
  CHECK(back.n_layers == 2);
  std::filesystem::remove(path);
}
