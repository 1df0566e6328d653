#pragma once

// Undirected graph metrics for circuits.

#include <span>
#include <utility>
#include <vector>

#include "concept_circuits/circuit.hpp"

namespace cc {

struct UGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // u < v, sorted, unique
  std::vector<int> labels;                 // original node id of each vertex (empty for ad-hoc graphs)

  /// Normalises the edge list (orders endpoints, sorts, dedups). Rejects self-loops and
  /// out-of-range endpoints.
  static UGraph make(int n, std::vector<std::pair<int, int>> edges);
  std::vector<std::vector<int>> adjacency() const;
};

/// Vertices are the computational nodes incident to at least one circuit edge (ascending id);
/// parallel port edges between one node pair collapse to a single undirected edge.
UGraph to_undirected(std::span<const int> circuit_edges, const CompGraph& graph);

struct CentralityOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

/// Power iteration on A + I restricted to the largest connected component (ties: the one
/// holding the smallest vertex), L2-normalised; vertices outside it get 0. A graph without
/// edges gets all zeros.
std::vector<double> eigenvector_centrality(const UGraph& g, const CentralityOptions& options = {});
/// Population standard deviation of eigenvector_centrality over all vertices.
double eigenvector_centrality_std(const UGraph& g, const CentralityOptions& options = {});

double density(const UGraph& g);
/// Distinct directed node pairs over n(n-1), n = circuit nodes (sensitivity variant, before projection).
double directed_density(std::span<const int> circuit_edges, const CompGraph& graph);
double global_efficiency(const UGraph& g);
std::vector<int> core_numbers(const UGraph& g);
double avg_kcore(const UGraph& g);

struct MetricVector {
  double centrality_std = 0.0;
  double density = 0.0;
  double global_efficiency = 0.0;
  double avg_kcore = 0.0;

  bool operator==(const MetricVector&) const = default;
};

inline constexpr const char* kMetricNames[4] = {"centrality_std", "density", "global_efficiency", "avg_kcore"};
double metric_value(const MetricVector& m, int index);

/// All four metrics; the empty graph maps to zeros.
MetricVector metric_vector(const UGraph& g);
MetricVector metric_vector(const Circuit& circuit, const CompGraph& graph);

/// Metric vectors of many circuits, computed in parallel.
std::vector<MetricVector> metric_vectors(std::span<const Circuit> circuits, const CompGraph& graph);
namespace reference {
std::vector<MetricVector> metric_vectors(std::span<const Circuit> circuits, const CompGraph& graph);
}  // namespace reference

/// |E1 ∩ E2| / |E1 ∪ E2| over directed port-level edge ids; 1 when both are empty.
double jaccard_edges(const Circuit& a, const Circuit& b);

}  // namespace cc
