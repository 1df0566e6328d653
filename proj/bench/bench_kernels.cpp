// Parallel kernels against their serial reference:: counterparts.

#include <benchmark/benchmark.h>

#include <random>

#include "concept_circuits/circuit.hpp"
#include "concept_circuits/graph_metrics.hpp"
#include "concept_circuits/train.hpp"

using namespace cc;

namespace {

ModelConfig bench_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_model = 32;
  c.d_mlp = 64;
  c.context_len = 24;
  c.vocab_size = 200;
  return c;
}

std::vector<TokenSeq> random_batch(int n, int len, int vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(3, vocab - 1);
  std::vector<TokenSeq> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    s.push_back(Vocabulary::kBos);
    for (int i = 1; i < len; ++i) s.push_back(u(rng));
  }
  return out;
}

std::vector<CorruptPair> random_pairs(int n, int vocab) {
  std::vector<CorruptPair> out;
  for (auto& s : random_batch(n, 10, vocab, 3)) {
    CorruptPair p;
    p.clean = s;
    p.corrupt = s;
    p.corrupt[1] = 3 + (s[1] + 7) % (vocab - 3);
    p.target = 5;
    p.metric_pos = static_cast<int>(s.size()) - 1;
    out.push_back(p);
  }
  return out;
}

void BM_LossAndGrads(benchmark::State& st) {
  const auto params = init_parameters(bench_config(), 1);
  const auto batch = random_batch(32, 20, 200, 2);
  for (auto _ : st) {
    auto g = st.range(0) ? loss_and_grads(params, batch) : reference::loss_and_grads(params, batch);
    benchmark::DoNotOptimize(g.loss);
  }
}

void BM_ConceptEdgeScores(benchmark::State& st) {
  const auto params = init_parameters(bench_config(), 1);
  const auto pairs = random_pairs(8, 200);
  for (auto _ : st) {
    auto s = st.range(0) ? concept_edge_scores(params, pairs) : reference::concept_edge_scores(params, pairs);
    benchmark::DoNotOptimize(s.data());
  }
}

void BM_MetricVectors(benchmark::State& st) {
  ModelConfig c = bench_config();
  c.n_layers = 6;
  c.n_heads = 4;
  const auto graph = CompGraph::build(c);
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.05);
  std::vector<Circuit> circuits(64);
  for (auto& ci : circuits) {
    for (int e = 0; e < graph.edge_count(); ++e) {
      if (coin(rng)) ci.edges.push_back(e);
    }
  }
  for (auto _ : st) {
    auto m = st.range(0) ? metric_vectors(circuits, graph) : reference::metric_vectors(circuits, graph);
    benchmark::DoNotOptimize(m.data());
  }
}

void BM_EvaluateKnowledge(benchmark::State& st) {
  std::vector<std::string> tokens = {"<pad>", "<bos>", "<unk>"};
  for (int i = 3; i < 200; ++i) tokens.push_back("w" + std::to_string(i));
  const auto vocab = Vocabulary::from_tokens(tokens);
  const auto params = init_parameters(bench_config(), 1);
  std::vector<Sample> samples(128);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].prefix = "w" + std::to_string(3 + i % 150) + " w10 w11 w12";
    samples[i].target = " w" + std::to_string(20 + i % 100);
  }
  for (auto _ : st) {
    auto r = st.range(0) ? evaluate_knowledge(params, vocab, samples) : reference::evaluate_knowledge(params, vocab, samples);
    benchmark::DoNotOptimize(r.data());
  }
}

}  // namespace

// Arg 0: serial reference, arg 1: OpenMP kernel.
BENCHMARK(BM_LossAndGrads)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConceptEdgeScores)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MetricVectors)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateKnowledge)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
