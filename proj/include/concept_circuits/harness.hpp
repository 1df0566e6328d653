#pragma once

// Experiment configuration, dataset bundles, the two-stage pipeline and run manifests.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "concept_circuits/circuit.hpp"
#include "concept_circuits/common.hpp"
#include "concept_circuits/concept_kb.hpp"
#include "concept_circuits/model.hpp"
#include "concept_circuits/train.hpp"
#include "concept_circuits/vocab.hpp"
#include "json.hpp"

namespace cc {

inline constexpr const char* kToolVersion = "0.1.0";

struct DatasetOptions {
  std::string kg;                 // triple file; empty: synthesise one
  int synthetic_concepts = 600;   // used when kg is empty
  int synthetic_triples = 0;      // 0: 1..6 per concept
  std::size_t max_concepts = 0;   // 0: keep all
  int resamples = 30;
  int per_relation = 50;
  double test_fraction = 0.2;
  int test_concepts = 500;
  int bio_people = 200;
  std::uint64_t seed = 1;         // data stream (names, templates, split, bio)
};

struct ModelOptions {
  ModelConfig model;              // vocab_size is filled from the built vocabulary
  std::uint64_t seed = 11;        // initialisation stream
};

struct CircuitOptions {
  double threshold = 0.70;
  int m = 5;
  int max_concepts = 100;             // circuits for at most this many test concepts (0: all)
  std::uint64_t seed = 21;            // corruption stream for extraction pairs
  std::uint64_t heldout_seed = 22;    // corruption stream for held-out re-evaluation
  bool linear_scan = false;
  bool raw_ratio = false;
};

struct AnalysisOptions {
  int k = 10;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::uint64_t permutation_seed = 31;
};

struct ExperimentConfig {
  DatasetOptions dataset;
  ModelOptions model;
  TrainConfig stage1;
  TrainConfig stage2;
  CircuitOptions circuit;
  AnalysisOptions analysis;
  std::string output_dir = "runs/default";

  ExperimentConfig();
};

nlohmann::json config_to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& c);

/// Type invariants and cross-field constraints; empty means valid.
std::vector<std::string> validate_config(const ExperimentConfig& c);

// ---------------------------------------------------------------------------
// Dataset bundle (what gen-data writes and the other steps read)

struct DatasetBundle {
  KnowledgeBase kb;  // fictional names, test split marked
  TemplatePools pools;
  DatasetSplit split;
  std::vector<std::string> bio;
  Vocabulary vocab;
};

DatasetBundle build_dataset(const DatasetOptions& options);
void write_dataset(const std::filesystem::path& dir, const DatasetBundle& bundle);
/// Reads kb, samples, bio corpus and vocabulary back (template pools are not reloaded).
DatasetBundle read_dataset(const std::filesystem::path& dir);

/// Test samples grouped by concept id.
std::map<int, std::vector<Sample>> samples_by_concept(std::span<const Sample> samples);

// ---------------------------------------------------------------------------
// Circuits for a set of concepts at one checkpoint

struct ConceptCircuits {
  std::vector<Circuit> circuits;
  std::vector<double> heldout;  // per circuit; NaN when every held-out pair is degenerate
};

/// Extracts one circuit per concept (concepts processed in parallel) and re-evaluates each
/// on held-out pairs drawn with a different corruption seed.
ConceptCircuits extract_concept_circuits(const Parameters& params, const DatasetBundle& data,
                                         std::span<const int> concepts, const CircuitOptions& options,
                                         const std::string& checkpoint_name);

// ---------------------------------------------------------------------------
// Pipeline

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  nlohmann::json config;
  std::string tool_version = kToolVersion;
  std::vector<ManifestEntry> files;
  std::vector<std::pair<std::string, double>> timings;  // step name -> seconds
};

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_string(std::string_view data);

/// Every regular file under `root` (except the manifest itself), sorted by relative path.
std::vector<ManifestEntry> scan_outputs(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);

/// Raised when a pipeline step fails; the message names the step.
class PipelineError : public Error {
 public:
  PipelineError(const std::string& step, const std::string& what)
      : Error("pipeline step '" + step + "' failed: " + what), step_(step) {}
  const std::string& step() const { return step_; }

 private:
  std::string step_;
};

/// gen-data -> stage 1 -> circuits at init and stage-1 end -> stage 2 with circuits at each
/// checkpoint -> degrees, correlations, trajectories. Throws InvalidArgument on an invalid config.
RunManifest run_pipeline(const ExperimentConfig& config, std::ostream* log = nullptr);

std::string checkpoint_name(Stage stage, int step);

}  // namespace cc
