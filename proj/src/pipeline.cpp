#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "concept_circuits/common.hpp"
#include "concept_circuits/dynamics.hpp"
#include "concept_circuits/harness.hpp"
#include "concept_circuits/parallel.hpp"

namespace cc {

namespace fs = std::filesystem;
using nlohmann::json;

// Seed streams derived from DatasetOptions::seed.
namespace stream {
constexpr std::uint64_t kKg = 1;
constexpr std::uint64_t kNames = 2;
constexpr std::uint64_t kTemplates = 3;
constexpr std::uint64_t kSamples = 4;
constexpr std::uint64_t kBio = 5;
}  // namespace stream

DatasetBundle build_dataset(const DatasetOptions& o) {
  DatasetBundle b;
  IngestOptions ingest;
  ingest.max_concepts = o.max_concepts;
  if (o.kg.empty()) {
    SyntheticKgOptions s;
    s.concepts = o.synthetic_concepts;
    s.retained_triples = o.synthetic_triples;
    s.seed = mix_seed(o.seed, stream::kKg);
    std::istringstream in(synthesize_knowledge_graph(s));
    b.kb = parse_knowledge_graph(in, ingest);
  } else {
    b.kb = load_knowledge_graph(o.kg, ingest);
  }
  require(!b.kb.concepts.empty(), "dataset: the knowledge graph has no retained concepts");

  NamingOptions naming;
  naming.reserved = default_reserved_words();
  b.kb = assign_fictional_names(std::move(b.kb), mix_seed(o.seed, stream::kNames), naming);
  b.pools = build_template_pools(retained_relations(), o.per_relation, o.test_fraction, mix_seed(o.seed, stream::kTemplates));

  const int n_test = std::min(o.test_concepts, static_cast<int>(b.kb.concepts.size()));
  b.split = generate_dataset(b.kb, b.pools, o.resamples, n_test, mix_seed(o.seed, stream::kSamples));
  b.kb = mark_test_split(std::move(b.kb), b.split.test_concepts);
  b.bio = generate_bio_corpus(o.bio_people, mix_seed(o.seed, stream::kBio));

  std::vector<std::string> corpus;
  corpus.reserve(b.split.train.size() + b.bio.size());
  for (const auto& s : b.split.train) corpus.push_back(s.prefix + s.target);
  corpus.insert(corpus.end(), b.bio.begin(), b.bio.end());
  b.vocab = Vocabulary::build(corpus);
  return b;
}

void write_dataset(const fs::path& dir, const DatasetBundle& b) {
  fs::create_directories(dir);
  write_kb_json(dir / DatasetFiles::kKb, b.kb);
  write_templates_json(dir / DatasetFiles::kTemplates, b.pools);
  write_samples_jsonl(dir / DatasetFiles::kTrain, b.split.train);
  write_samples_jsonl(dir / DatasetFiles::kTest, b.split.test);
  write_stats_json(dir / DatasetFiles::kStats, b.split.stats, b.kb.report);
  write_lines(dir / DatasetFiles::kBio, b.bio);
  b.vocab.save(dir / DatasetFiles::kVocab);
}

DatasetBundle read_dataset(const fs::path& dir) {
  require(fs::is_directory(dir), "dataset directory " + dir.string() + " does not exist");
  DatasetBundle b;
  b.kb = read_kb_json(dir / DatasetFiles::kKb);
  b.split.train = read_samples_jsonl(dir / DatasetFiles::kTrain);
  b.split.test = read_samples_jsonl(dir / DatasetFiles::kTest);
  for (const auto& c : b.kb.concepts) {
    if (c.split == ConceptSplit::TrainAndTest) b.split.test_concepts.push_back(c.id);
  }
  std::sort(b.split.test_concepts.begin(), b.split.test_concepts.end());
  b.split.stats.train_samples = b.split.train.size();
  b.split.stats.test_samples = b.split.test.size();
  b.split.stats.test_concepts = b.split.test_concepts.size();
  b.split.stats.train_concepts = b.kb.concepts.size();
  b.bio = read_lines(dir / DatasetFiles::kBio);
  b.vocab = Vocabulary::load(dir / DatasetFiles::kVocab);
  return b;
}

std::map<int, std::vector<Sample>> samples_by_concept(std::span<const Sample> samples) {
  std::map<int, std::vector<Sample>> out;
  for (const auto& s : samples) out[s.concept_id].push_back(s);
  return out;
}

ConceptCircuits extract_concept_circuits(const Parameters& params, const DatasetBundle& data,
                                         std::span<const int> concepts, const CircuitOptions& options,
                                         const std::string& checkpoint_name) {
  const auto by_concept = samples_by_concept(data.split.test);
  ExtractOptions ex;
  ex.threshold = options.threshold;
  ex.attribution.m = options.m;
  ex.faithfulness.raw_ratio = options.raw_ratio;
  ex.linear_scan = options.linear_scan;

  ConceptCircuits out;
  out.circuits.resize(concepts.size());
  out.heldout.resize(concepts.size());
  parallel_for(concepts.size(), [&](std::size_t i) {
    const int id = concepts[i];
    auto it = by_concept.find(id);
    require(it != by_concept.end(), "concept " + std::to_string(id) + " has no test samples");
    const auto pairs = make_concept_pairs(it->second, data.kb, data.vocab, options.seed);
    Circuit c = extract_circuit(params, pairs, ex);
    c.concept_id = id;
    c.checkpoint = checkpoint_name;

    const auto held = make_concept_pairs(it->second, data.kb, data.vocab, options.heldout_seed);
    std::vector<PreparedPair> prepared;
    prepared.reserve(held.size());
    for (const auto& p : held) prepared.push_back(prepare_pair(params, p));
    const auto mask = c.mask(static_cast<int>(c.scores.size()));
    bool any_live = false;
    for (const auto& p : prepared) any_live |= std::abs(p.clean_metric - p.corrupt_metric) >= ex.faithfulness.degenerate_eps;
    out.heldout[i] = any_live ? faithfulness(params, mask, prepared, ex.faithfulness).value
                              : std::numeric_limits<double>::quiet_NaN();
    out.circuits[i] = std::move(c);
  });
  return out;
}

std::string checkpoint_name(Stage stage, int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%06d", std::string(stage_name(stage)).c_str(), step);
  return buf;
}

namespace {

class StepTimer {
 public:
  StepTimer(RunManifest& m, std::ostream* log, std::string name) : m_(m), log_(log), name_(std::move(name)) {
    if (log_) *log_ << "[" << name_ << "] start" << std::endl;
  }
  ~StepTimer() {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    m_.timings.emplace_back(name_, secs);
    if (log_) *log_ << "[" << name_ << "] " << secs << " s" << std::endl;
  }

 private:
  RunManifest& m_;
  std::ostream* log_;
  std::string name_;
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

template <class F>
void run_step(RunManifest& m, std::ostream* log, const std::string& name, F&& body) {
  StepTimer t(m, log, name);
  try {
    body();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

std::string circuit_file(int concept_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "concept_%04d.json", concept_id);
  return buf;
}

// Extracts, saves and converts to metric rows; returns the per-circuit held-out values too.
struct CheckpointCircuits {
  std::vector<MetricRow> rows;
  std::vector<double> heldout;
  std::vector<Circuit> circuits;
};

CheckpointCircuits circuits_at(const Parameters& params, const DatasetBundle& data, std::span<const int> concepts,
                               const CircuitOptions& options, const std::string& name, int step, const fs::path& dir) {
  const CompGraph graph = CompGraph::build(params.config());
  auto cc = extract_concept_circuits(params, data, concepts, options, name);
  fs::create_directories(dir / name);
  CheckpointCircuits out;
  for (const auto& c : cc.circuits) {
    save_circuit(dir / name / circuit_file(c.concept_id), c, graph);
    out.rows.push_back(make_metric_row(c, graph, step));
  }
  out.heldout = std::move(cc.heldout);
  out.circuits = std::move(cc.circuits);
  return out;
}

void add_correlations(std::vector<CorrelationRow>& rows, const std::string& degree, const std::string& join,
                      std::span<const DegreeRecord> degrees, std::span<const MetricRow> metrics,
                      const SpearmanOptions& sp) {
  std::array<CorrelationResult, 4> res;
  try {
    res = correlate_degrees_with_metrics(degrees, metrics, sp);
  } catch (const InvalidArgument&) {
    // Too few joined concepts: report the cell as undefined instead of aborting the analysis.
    for (auto& r : res) {
      r.defined = false;
      r.rho = std::numeric_limits<double>::quiet_NaN();
      r.p_value = std::numeric_limits<double>::quiet_NaN();
    }
  }
  for (int m = 0; m < 4; ++m) rows.push_back({degree, join, kMetricNames[static_cast<std::size_t>(m)], res[static_cast<std::size_t>(m)]});
}

CorrelationResult safe_degree_correlation(std::span<const DegreeRecord> a, std::span<const DegreeRecord> b,
                                          const SpearmanOptions& sp) {
  try {
    return correlate_degrees(a, b, sp);
  } catch (const InvalidArgument&) {
    CorrelationResult r;
    r.defined = false;
    r.rho = std::numeric_limits<double>::quiet_NaN();
    r.p_value = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json correlation_json(const CorrelationResult& r) {
  return {{"rho", number_or_null(r.rho)},
          {"p_value", number_or_null(r.p_value)},
          {"n", r.n},
          {"method", pvalue_method_name(r.method)},
          {"defined", r.defined}};
}

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& config, std::ostream* log) {
  const auto violations = validate_config(config);
  if (!violations.empty()) {
    std::string msg = "invalid config:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw InvalidArgument(msg);
  }

  RunManifest manifest;
  manifest.config = config_to_json(config);
  const fs::path out = config.output_dir;
  const fs::path data_dir = out / "data";
  const fs::path ckpt_dir = out / "ckpt";
  const fs::path circuit_dir = out / "circuits";
  const fs::path report_dir = out / "reports";
  fs::create_directories(out);
  save_config(out / "config.json", config);

  DatasetBundle data;
  run_step(manifest, log, "gen-data", [&] {
    data = build_dataset(config.dataset);
    write_dataset(data_dir, data);
  });

  ModelConfig mc = config.model.model;
  mc.vocab_size = data.vocab.size();
  const int ctx = mc.context_len;
  fs::create_directories(ckpt_dir);

  std::vector<Checkpoint> stage1;
  run_step(manifest, log, "train-stage1", [&] {
    const Parameters init = init_parameters(mc, config.model.seed);
    const auto seqs = encode_samples(data.vocab, data.split.train, ctx);
    stage1 = train_stage(init, seqs, config.stage1, Stage::Stage1);
    Checkpoint init_ck = stage1.front();
    init_ck.stage = Stage::Init;
    save_checkpoint(ckpt_dir / (checkpoint_name(Stage::Init, 0) + ".ckpt"), init_ck);
    for (std::size_t i = 1; i < stage1.size(); ++i) {
      save_checkpoint(ckpt_dir / (checkpoint_name(Stage::Stage1, stage1[i].step) + ".ckpt"), stage1[i]);
    }
  });
  const Parameters& pi0 = *stage1.front().params;
  const Parameters& pi1 = *stage1.back().params;
  const std::string pi0_name = checkpoint_name(Stage::Init, 0);
  const std::string pi1_name =
      stage1.size() > 1 ? checkpoint_name(Stage::Stage1, stage1.back().step) : pi0_name;

  std::vector<int> concepts = data.split.test_concepts;
  if (config.circuit.max_concepts > 0 && static_cast<int>(concepts.size()) > config.circuit.max_concepts) {
    concepts.resize(static_cast<std::size_t>(config.circuit.max_concepts));
  }

  CheckpointCircuits at_pi0, at_pi1;
  run_step(manifest, log, "extract-stage1", [&] {
    at_pi0 = circuits_at(pi0, data, concepts, config.circuit, pi0_name, 0, circuit_dir);
    at_pi1 = stage1.size() > 1
                 ? circuits_at(pi1, data, concepts, config.circuit, pi1_name, stage1.back().step, circuit_dir)
                 : at_pi0;
  });

  std::vector<Checkpoint> stage2;
  run_step(manifest, log, "train-stage2", [&] {
    const auto seqs = encode_texts(data.vocab, data.bio, ctx);
    stage2 = train_stage(pi1, seqs, config.stage2, Stage::Stage2);
    for (std::size_t i = 1; i < stage2.size(); ++i) {
      save_checkpoint(ckpt_dir / (checkpoint_name(Stage::Stage2, stage2[i].step) + ".ckpt"), stage2[i]);
    }
  });
  const Parameters& pi2 = *stage2.back().params;

  // Stage-2 trajectory rows: the stage-2 step-0 point is pi1.
  std::vector<int> traj_steps;
  std::vector<MetricRow> traj_rows;
  std::vector<MetricRow> all_rows = at_pi0.rows;
  if (stage1.size() > 1) all_rows.insert(all_rows.end(), at_pi1.rows.begin(), at_pi1.rows.end());
  std::vector<MetricRow> at_pi2 = at_pi1.rows;
  run_step(manifest, log, "extract-stage2", [&] {
    for (const auto& ck : stage2) {
      traj_steps.push_back(ck.step);
      if (ck.step == 0) {
        for (auto r : at_pi1.rows) {
          r.step = 0;
          traj_rows.push_back(r);
        }
        continue;
      }
      auto cc = circuits_at(*ck.params, data, concepts, config.circuit, checkpoint_name(Stage::Stage2, ck.step), ck.step,
                            circuit_dir);
      traj_rows.insert(traj_rows.end(), cc.rows.begin(), cc.rows.end());
      all_rows.insert(all_rows.end(), cc.rows.begin(), cc.rows.end());
      if (ck.step == stage2.back().step) at_pi2 = cc.rows;
    }
  });

  run_step(manifest, log, "analyze", [&] {
    fs::create_directories(report_dir);
    const auto learning = compute_degrees(pi0, pi1, data.vocab, data.split.test, DegreeKind::Learning);
    const auto forgetting = compute_degrees(pi1, pi2, data.vocab, data.split.test, DegreeKind::Forgetting);
    write_degrees_csv(report_dir / "degrees_learning.csv", learning);
    write_degrees_csv(report_dir / "degrees_forgetting.csv", forgetting);
    write_triple_degrees_csv(report_dir / "triples_learning.csv", learning);
    write_triple_degrees_csv(report_dir / "triples_forgetting.csv", forgetting);
    write_metrics_csv(report_dir / "metrics.csv", all_rows);

    SpearmanOptions sp;
    sp.seed = config.analysis.permutation_seed;
    std::vector<CorrelationRow> corr;
    add_correlations(corr, "learning_logit", "pre", learning.logit, at_pi0.rows, sp);
    add_correlations(corr, "learning_logit", "post", learning.logit, at_pi1.rows, sp);
    add_correlations(corr, "learning_logprob", "pre", learning.logprob, at_pi0.rows, sp);
    add_correlations(corr, "learning_logprob", "post", learning.logprob, at_pi1.rows, sp);
    add_correlations(corr, "forgetting_logit", "pre", forgetting.logit, at_pi1.rows, sp);
    add_correlations(corr, "forgetting_logit", "post", forgetting.logit, at_pi2, sp);
    add_correlations(corr, "forgetting_logprob", "pre", forgetting.logprob, at_pi1.rows, sp);
    add_correlations(corr, "forgetting_logprob", "post", forgetting.logprob, at_pi2, sp);
    const auto lf_logit = safe_degree_correlation(learning.logit, forgetting.logit, sp);
    const auto lf_logprob = safe_degree_correlation(learning.logprob, forgetting.logprob, sp);
    corr.push_back({"learning_logit", "forgetting_logit", "degree", lf_logit});
    corr.push_back({"learning_logprob", "forgetting_logprob", "degree", lf_logprob});
    write_correlations_csv(report_dir / "correlations.csv", corr);

    TrajectoryResult traj;
    if (traj_steps.size() >= 2) traj = track_trajectories(traj_steps, traj_rows);
    write_trajectories_csv(report_dir / "trajectories.csv", traj);

    int unfaithful = 0, degenerate = 0, heldout_n = 0;
    double heldout_sum = 0.0;
    for (std::size_t i = 0; i < at_pi1.circuits.size(); ++i) {
      const auto& c = at_pi1.circuits[i];
      unfaithful += c.unfaithful;
      degenerate += c.degenerate;
      if (!c.unfaithful && std::isfinite(at_pi1.heldout[i])) {
        heldout_sum += at_pi1.heldout[i];
        ++heldout_n;
      }
    }
    json summary = {
        {"tool_version", kToolVersion},
        {"seeds",
         {{"data", config.dataset.seed},
          {"model", config.model.seed},
          {"stage1", config.stage1.seed},
          {"stage2", config.stage2.seed},
          {"corruption", config.circuit.seed},
          {"heldout_corruption", config.circuit.heldout_seed},
          {"permutation", config.analysis.permutation_seed}}},
        {"concepts", data.kb.concepts.size()},
        {"triples", data.kb.triples.size()},
        {"train_samples", data.split.train.size()},
        {"test_samples", data.split.test.size()},
        {"vocab_size", data.vocab.size()},
        {"parameters", pi0.size()},
        {"circuit_concepts", concepts.size()},
        {"checkpoints", {{"pi0", pi0_name}, {"pi1", pi1_name}, {"stage2_steps", traj_steps}}},
        {"stage1_final_loss", stage1.back().loss},
        {"stage2_final_loss", stage2.back().loss},
        {"mean_learning_logit", mean_degree(learning.logit)},
        {"mean_forgetting_logit", mean_degree(forgetting.logit)},
        {"mean_learning_logprob", mean_degree(learning.logprob)},
        {"mean_forgetting_logprob", mean_degree(forgetting.logprob)},
        {"excluded_records", learning.excluded_records},
        {"learning_vs_forgetting_logit", correlation_json(lf_logit)},
        {"learning_vs_forgetting_logprob", correlation_json(lf_logprob)},
        {"pi1_circuits",
         {{"count", at_pi1.circuits.size()},
          {"unfaithful", unfaithful},
          {"degenerate", degenerate},
          {"heldout_evaluated", heldout_n},
          {"heldout_mean_faithfulness", heldout_n > 0 ? json(heldout_sum / heldout_n) : json(nullptr)}}},
    };
    if (traj_steps.size() >= 2) {
      json peaks = json::object();
      for (std::size_t m = 0; m < 4; ++m) {
        peaks[kMetricNames[m]] = {{"peak_step", traj.summary.peak_step[m]},
                                  {"post_peak_below", static_cast<bool>(traj.summary.post_peak_below[m])}};
      }
      summary["trajectory"] = peaks;
    }
    std::ofstream os(report_dir / "summary.json");
    if (!os) throw Error("cannot write summary.json");
    os << summary.dump(2) << "\n";
  });

  run_step(manifest, log, "manifest", [&] {
    manifest.files = scan_outputs(out);
    write_manifest(out / "manifest.json", manifest);
  });
  return manifest;
}

}  // namespace cc
