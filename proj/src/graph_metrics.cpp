#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "concept_circuits/common.hpp"
#include "concept_circuits/graph_metrics.hpp"
#include "concept_circuits/parallel.hpp"

namespace cc {

UGraph UGraph::make(int n, std::vector<std::pair<int, int>> edges) {
  require(n >= 0, "graph node count must be non-negative");
  for (auto& [u, v] : edges) {
    require(u >= 0 && u < n && v >= 0 && v < n, "graph edge endpoint out of range");
    require(u != v, "graph edges may not be self-loops");
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  UGraph g;
  g.n = n;
  g.edges = std::move(edges);
  return g;
}

std::vector<std::vector<int>> UGraph::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const auto& [u, v] : edges) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }
  return adj;
}

UGraph to_undirected(std::span<const int> circuit_edges, const CompGraph& graph) {
  std::set<int> nodes;
  for (int e : circuit_edges) {
    require(e >= 0 && e < graph.edge_count(), "circuit edge id " + std::to_string(e) + " not in the graph");
    nodes.insert(graph.edges[static_cast<std::size_t>(e)].src);
    nodes.insert(graph.edges[static_cast<std::size_t>(e)].dst);
  }
  std::vector<int> labels(nodes.begin(), nodes.end());
  auto index = [&](int node) {
    return static_cast<int>(std::lower_bound(labels.begin(), labels.end(), node) - labels.begin());
  };
  std::vector<std::pair<int, int>> edges;
  for (int e : circuit_edges) {
    const CompEdge& ce = graph.edges[static_cast<std::size_t>(e)];
    edges.emplace_back(index(ce.src), index(ce.dst));
  }
  UGraph g = UGraph::make(static_cast<int>(labels.size()), std::move(edges));
  g.labels = std::move(labels);
  return g;
}

namespace {

std::vector<int> largest_component(const UGraph& g, const std::vector<std::vector<int>>& adj) {
  std::vector<int> comp(static_cast<std::size_t>(g.n), -1);
  std::vector<int> best;
  for (int s = 0; s < g.n; ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    std::vector<int> members{s};
    comp[static_cast<std::size_t>(s)] = s;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (int w : adj[static_cast<std::size_t>(members[i])]) {
        if (comp[static_cast<std::size_t>(w)] < 0) {
          comp[static_cast<std::size_t>(w)] = s;
          members.push_back(w);
        }
      }
    }
    if (members.size() > best.size()) best = std::move(members);  // strict: earlier component wins ties
  }
  std::sort(best.begin(), best.end());
  return best;
}

}  // namespace

std::vector<double> eigenvector_centrality(const UGraph& g, const CentralityOptions& options) {
  std::vector<double> out(static_cast<std::size_t>(g.n), 0.0);
  if (g.edges.empty()) return out;
  const auto adj = g.adjacency();
  const std::vector<int> comp = largest_component(g, adj);
  const std::size_t c = comp.size();
  std::vector<int> local(static_cast<std::size_t>(g.n), -1);
  for (std::size_t i = 0; i < c; ++i) local[static_cast<std::size_t>(comp[i])] = static_cast<int>(i);

  std::vector<double> x(c, 1.0 / std::sqrt(static_cast<double>(c)));
  std::vector<double> y(c);
  double residual = INFINITY;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    double norm = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      double s = x[i];
      for (int w : adj[static_cast<std::size_t>(comp[i])]) s += x[static_cast<std::size_t>(local[static_cast<std::size_t>(w)])];
      y[i] = s;
      norm += s * s;
    }
    norm = std::sqrt(norm);
    residual = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      y[i] /= norm;
      residual = std::max(residual, std::abs(y[i] - x[i]));
    }
    x.swap(y);
    if (residual < options.tolerance) break;
  }
  if (!(residual < options.tolerance)) {
    throw NumericError("eigenvector centrality did not converge in " + std::to_string(options.max_iterations) +
                       " iterations (residual " + std::to_string(residual) + ")");
  }
  for (std::size_t i = 0; i < c; ++i) out[static_cast<std::size_t>(comp[i])] = x[i];
  return out;
}

double eigenvector_centrality_std(const UGraph& g, const CentralityOptions& options) {
  if (g.n == 0) return 0.0;
  const auto x = eigenvector_centrality(g, options);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= g.n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  return std::sqrt(var / g.n);
}

double density(const UGraph& g) {
  if (g.n < 2) return 0.0;
  return 2.0 * static_cast<double>(g.edges.size()) / (static_cast<double>(g.n) * (g.n - 1));
}

double directed_density(std::span<const int> circuit_edges, const CompGraph& graph) {
  std::set<std::pair<int, int>> arcs;
  std::set<int> nodes;
  for (int e : circuit_edges) {
    const CompEdge& ce = graph.edges.at(static_cast<std::size_t>(e));
    arcs.emplace(ce.src, ce.dst);
    nodes.insert(ce.src);
    nodes.insert(ce.dst);
  }
  const double n = static_cast<double>(nodes.size());
  if (n < 2) return 0.0;
  return static_cast<double>(arcs.size()) / (n * (n - 1));
}

double global_efficiency(const UGraph& g) {
  if (g.n < 2) return 0.0;
  const auto adj = g.adjacency();
  double sum = 0.0;
  std::vector<int> dist(static_cast<std::size_t>(g.n));
  for (int s = 0; s < g.n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[static_cast<std::size_t>(s)] = 0;
    std::queue<int> q;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int w : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(w)] < 0) {
          dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(u)] + 1;
          q.push(w);
        }
      }
    }
    for (int t = 0; t < g.n; ++t) {
      if (t != s && dist[static_cast<std::size_t>(t)] > 0) sum += 1.0 / dist[static_cast<std::size_t>(t)];
    }
  }
  return sum / (static_cast<double>(g.n) * (g.n - 1));
}

std::vector<int> core_numbers(const UGraph& g) {
  // Min-degree peeling; the running maximum of removal degrees is the core number.
  const auto adj = g.adjacency();
  std::vector<int> deg(static_cast<std::size_t>(g.n));
  for (int u = 0; u < g.n; ++u) deg[static_cast<std::size_t>(u)] = static_cast<int>(adj[static_cast<std::size_t>(u)].size());
  std::vector<char> removed(static_cast<std::size_t>(g.n), 0);
  std::vector<int> core(static_cast<std::size_t>(g.n), 0);
  int k = 0;
  for (int step = 0; step < g.n; ++step) {
    int best = -1;
    for (int u = 0; u < g.n; ++u) {
      if (!removed[static_cast<std::size_t>(u)] && (best < 0 || deg[static_cast<std::size_t>(u)] < deg[static_cast<std::size_t>(best)])) best = u;
    }
    k = std::max(k, deg[static_cast<std::size_t>(best)]);
    core[static_cast<std::size_t>(best)] = k;
    removed[static_cast<std::size_t>(best)] = 1;
    for (int w : adj[static_cast<std::size_t>(best)]) {
      if (!removed[static_cast<std::size_t>(w)]) --deg[static_cast<std::size_t>(w)];
    }
  }
  return core;
}

double avg_kcore(const UGraph& g) {
  if (g.n == 0) return 0.0;
  const auto core = core_numbers(g);
  double s = 0.0;
  for (int c : core) s += c;
  return s / g.n;
}

double metric_value(const MetricVector& m, int index) {
  switch (index) {
    case 0: return m.centrality_std;
    case 1: return m.density;
    case 2: return m.global_efficiency;
    case 3: return m.avg_kcore;
  }
  throw InvalidArgument("metric index out of range");
}

MetricVector metric_vector(const UGraph& g) {
  MetricVector m;
  if (g.n == 0) return m;
  m.centrality_std = eigenvector_centrality_std(g);
  m.density = density(g);
  m.global_efficiency = global_efficiency(g);
  m.avg_kcore = avg_kcore(g);
  return m;
}

MetricVector metric_vector(const Circuit& circuit, const CompGraph& graph) {
  return metric_vector(to_undirected(circuit.edges, graph));
}

std::vector<MetricVector> metric_vectors(std::span<const Circuit> circuits, const CompGraph& graph) {
  std::vector<MetricVector> out(circuits.size());
  parallel_for(circuits.size(), [&](std::size_t i) { out[i] = metric_vector(circuits[i], graph); });
  return out;
}

namespace reference {

std::vector<MetricVector> metric_vectors(std::span<const Circuit> circuits, const CompGraph& graph) {
  std::vector<MetricVector> out;
  out.reserve(circuits.size());
  for (const auto& c : circuits) out.push_back(metric_vector(c, graph));
  return out;
}

}  // namespace reference

double jaccard_edges(const Circuit& a, const Circuit& b) {
  if (a.n_layers != b.n_layers || a.n_heads != b.n_heads) {
    throw InvalidArgument("jaccard_edges: circuits come from different computational graphs");
  }
  std::set<int> ea(a.edges.begin(), a.edges.end());
  std::set<int> eb(b.edges.begin(), b.edges.end());
  if (ea.empty() && eb.empty()) return 1.0;
  std::size_t inter = 0;
  for (int e : ea) inter += eb.count(e);
  const std::size_t uni = ea.size() + eb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace cc
