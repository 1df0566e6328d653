#include <algorithm>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>

#include "CLI11.hpp"
#include "concept_circuits/circuit.hpp"
#include "concept_circuits/dynamics.hpp"
#include "concept_circuits/graph_metrics.hpp"
#include "concept_circuits/harness.hpp"

namespace fs = std::filesystem;
using namespace cc;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitValidation = 3;

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig load_checked(const std::string& path, bool validate = true) {
  ExperimentConfig c;
  if (!path.empty()) {
    try {
      c = load_config(path);
    } catch (const InvalidArgument& e) {
      throw ValidationFailure(e.what());
    }
  }
  if (validate) {
    const auto v = validate_config(c);
    if (!v.empty()) {
      std::string msg = "invalid config:";
      for (const auto& s : v) msg += "\n  " + s;
      throw ValidationFailure(msg);
    }
  }
  return c;
}

fs::path or_default(const std::string& given, const fs::path& fallback) { return given.empty() ? fallback : fs::path(given); }

std::vector<int> parse_ids(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::logic_error&) {
      throw InvalidArgument("not a concept id: '" + tok + "'");
    }
  }
  return out;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

// Trailing step number of a checkpoint name such as "stage2_000050".
int step_of(const std::string& name) {
  static const std::regex re(".*_([0-9]+)$");
  std::smatch m;
  return std::regex_match(name, m, re) ? std::stoi(m[1]) : 0;
}

Parameters parameters_for(const std::string& ckpt, const ExperimentConfig& cfg, const DatasetBundle& data) {
  if (!ckpt.empty()) return *load_checkpoint(ckpt).params;
  ModelConfig mc = cfg.model.model;
  mc.vocab_size = data.vocab.size();
  return init_parameters(mc, cfg.model.seed);
}

void check_vocab(const Parameters& p, const DatasetBundle& data) {
  require(p.config().vocab_size == data.vocab.size(),
          "checkpoint vocab_size " + std::to_string(p.config().vocab_size) + " does not match the dataset vocabulary (" +
              std::to_string(data.vocab.size()) + ")");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept circuits: extraction and learning/forgetting dynamics in small transformers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  auto add_config = [&](CLI::App* sub) { sub->add_option("-c,--config", config_path, "experiment config (JSON)"); };

  // synth-kg
  auto* synth = app.add_subcommand("synth-kg", "write a synthetic ConceptNet-style triple file");
  SyntheticKgOptions synth_opts;
  std::string synth_out;
  synth->add_option("--concepts", synth_opts.concepts, "number of concepts")->capture_default_str();
  synth->add_option("--triples", synth_opts.retained_triples, "exact retained triple count (0: 1..6 per concept)")
      ->capture_default_str();
  synth->add_option("--excluded", synth_opts.excluded_triples, "extra triples with excluded relations")
      ->capture_default_str();
  synth->add_option("--seed", synth_opts.seed)->capture_default_str();
  synth->add_option("-o,--out", synth_out, "output TSV")->required();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "render the train/test samples, bio corpus and vocabulary");
  add_config(gen);
  std::string gen_out;
  gen->add_option("-o,--out", gen_out, "dataset directory (default <output_dir>/data)");

  // train
  auto* train = app.add_subcommand("train", "train one stage and save its checkpoints");
  add_config(train);
  std::string train_data, train_init, train_out, train_stage_name = "stage1";
  int train_steps = -1;
  train->add_option("--data", train_data, "dataset directory (default <output_dir>/data)");
  train->add_option("--stage", train_stage_name, "stage1 (concept samples) or stage2 (bio corpus)")
      ->check(CLI::IsMember({"stage1", "stage2"}));
  train->add_option("--init", train_init, "starting checkpoint (default: fresh initialisation)");
  train->add_option("--steps", train_steps, "override the stage's step count");
  train->add_option("-o,--out", train_out, "checkpoint directory (default <output_dir>/ckpt)");

  // extract
  auto* extract = app.add_subcommand("extract", "extract concept circuits at one checkpoint");
  add_config(extract);
  std::string ex_data, ex_ckpt, ex_out, ex_concepts;
  extract->add_option("--data", ex_data, "dataset directory (default <output_dir>/data)");
  extract->add_option("--ckpt", ex_ckpt, "checkpoint file")->required();
  extract->add_option("--concepts", ex_concepts, "comma-separated concept ids (default: test concepts)");
  extract->add_option("-o,--out", ex_out, "circuit directory (default <output_dir>/circuits/<checkpoint>)");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "graph metrics of every circuit file in a directory");
  std::string met_dir, met_out;
  bool met_directed = false;
  metrics->add_option("--circuits", met_dir, "directory of circuit JSON files")->required();
  metrics->add_option("-o,--out", met_out, "metrics CSV")->required();
  metrics->add_flag("--directed", met_directed, "report directed density instead of the undirected projection's");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "degree, correlation and trajectory analyses");
  analyze->require_subcommand(1);
  auto* an_deg = analyze->add_subcommand("degrees", "learning or forgetting degrees between two checkpoints");
  add_config(an_deg);
  std::string deg_data, deg_before, deg_after, deg_kind = "learning", deg_out;
  an_deg->add_option("--data", deg_data, "dataset directory (default <output_dir>/data)");
  an_deg->add_option("--before", deg_before, "earlier checkpoint")->required();
  an_deg->add_option("--after", deg_after, "later checkpoint")->required();
  an_deg->add_option("--kind", deg_kind)->check(CLI::IsMember({"learning", "forgetting"}));
  an_deg->add_option("-o,--out", deg_out, "report directory")->required();

  auto* an_corr = analyze->add_subcommand("correlate", "Spearman between concept degrees and circuit metrics");
  std::string corr_degrees, corr_metrics, corr_against, corr_measure = "logit", corr_out, corr_join = "post";
  std::uint64_t corr_seed = 31;
  an_corr->add_option("--degrees", corr_degrees, "degrees CSV")->required();
  an_corr->add_option("--metrics", corr_metrics, "metrics CSV (restricted to one checkpoint with --checkpoint)");
  an_corr->add_option("--against", corr_against, "second degrees CSV (degree-vs-degree correlation)");
  an_corr->add_option("--measure", corr_measure)->check(CLI::IsMember({"logit", "logprob"}));
  an_corr->add_option("--join", corr_join, "label for the metric checkpoint");
  std::string corr_ckpt;
  an_corr->add_option("--checkpoint", corr_ckpt, "only metric rows from this checkpoint");
  an_corr->add_option("--seed", corr_seed, "permutation-test seed")->capture_default_str();
  an_corr->add_option("-o,--out", corr_out, "correlations CSV")->required();

  auto* an_traj = analyze->add_subcommand("trajectory", "per-concept metric series across checkpoints");
  std::string traj_metrics, traj_prefix = "stage2", traj_out;
  an_traj->add_option("--metrics", traj_metrics, "metrics CSV")->required();
  an_traj->add_option("--prefix", traj_prefix, "checkpoint name prefix to keep")->capture_default_str();
  an_traj->add_option("-o,--out", traj_out, "trajectories CSV")->required();

  // interference
  auto* inter = app.add_subcommand("interference", "joint training with high/moderate/weak related groups");
  add_config(inter);
  std::string in_data, in_ckpt, in_out, in_groups = "high,moderate,weak", in_vectors;
  int in_k = -1, in_targets = 30;
  inter->add_option("--data", in_data, "dataset directory (default <output_dir>/data)");
  inter->add_option("--ckpt", in_ckpt, "base checkpoint (default: fresh initialisation)");
  inter->add_option("--k", in_k, "group size (default analysis.K)");
  inter->add_option("--groups", in_groups)->capture_default_str();
  inter->add_option("--targets", in_targets, "number of target concepts (test concepts, ascending)")
      ->capture_default_str();
  inter->add_option("--vectors", in_vectors, "external concept vectors (id v1 v2 ...)");
  inter->add_option("-o,--out", in_out, "interference CSV")->required();

  // transfer
  auto* transfer = app.add_subcommand("transfer", "knowledge-type transferability matrix");
  add_config(transfer);
  std::string tr_data, tr_ckpt, tr_out;
  int tr_steps = -1;
  transfer->add_option("--data", tr_data, "dataset directory (default <output_dir>/data)");
  transfer->add_option("--ckpt", tr_ckpt, "base checkpoint (default: fresh initialisation)");
  transfer->add_option("--steps", tr_steps, "steps per stage (default: the stage configs)");
  transfer->add_option("-o,--out", tr_out, "transfer matrix CSV")->required();

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "run the full two-stage pipeline");
  add_config(pipe);
  std::string pipe_out;
  pipe->add_option("-o,--output-dir", pipe_out, "override output_dir");

  // validate
  auto* validate = app.add_subcommand("validate", "check a config and print every violation");
  add_config(validate);
  bool print_default = false;
  validate->add_flag("--print-default", print_default, "print the default config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) {
      std::ofstream os(synth_out);
      if (!os) throw Error("cannot write " + synth_out);
      os << synthesize_knowledge_graph(synth_opts);
      std::cout << "wrote " << synth_out << "\n";
    } else if (*gen) {
      const auto cfg = load_checked(config_path);
      const auto data = build_dataset(cfg.dataset);
      const fs::path dir = or_default(gen_out, fs::path(cfg.output_dir) / "data");
      write_dataset(dir, data);
      const auto& st = data.split.stats;
      std::cout << "concepts " << data.kb.concepts.size() << ", triples " << data.kb.triples.size() << ", train samples "
                << st.train_samples << ", test samples " << st.test_samples << ", vocab " << data.vocab.size() << "\n"
                << "wrote " << dir.string() << "\n";
    } else if (*train) {
      auto cfg = load_checked(config_path);
      const auto data = read_dataset(or_default(train_data, fs::path(cfg.output_dir) / "data"));
      const Stage stage = parse_stage(train_stage_name);
      require(stage == Stage::Stage1 || !train_init.empty(), "train: stage2 needs --init");
      const Parameters init = parameters_for(train_init, cfg, data);
      check_vocab(init, data);
      TrainConfig tc = stage == Stage::Stage1 ? cfg.stage1 : cfg.stage2;
      if (train_steps >= 0) tc.steps = train_steps;
      const int ctx = init.config().context_len;
      const auto seqs = stage == Stage::Stage1 ? encode_samples(data.vocab, data.split.train, ctx)
                                               : encode_texts(data.vocab, data.bio, ctx);
      const auto ckpts = train_stage(init, seqs, tc, stage);
      const fs::path dir = or_default(train_out, fs::path(cfg.output_dir) / "ckpt");
      fs::create_directories(dir);
      for (const auto& ck : ckpts) {
        const fs::path p = dir / (checkpoint_name(stage, ck.step) + ".ckpt");
        save_checkpoint(p, ck);
        std::cout << p.string() << " loss " << ck.loss << "\n";
      }
    } else if (*extract) {
      const auto cfg = load_checked(config_path);
      const auto data = read_dataset(or_default(ex_data, fs::path(cfg.output_dir) / "data"));
      const auto ck = load_checkpoint(ex_ckpt);
      check_vocab(*ck.params, data);
      std::vector<int> concepts = ex_concepts.empty() ? data.split.test_concepts : parse_ids(ex_concepts);
      if (ex_concepts.empty() && cfg.circuit.max_concepts > 0 &&
          static_cast<int>(concepts.size()) > cfg.circuit.max_concepts) {
        concepts.resize(static_cast<std::size_t>(cfg.circuit.max_concepts));
      }
      const std::string name = fs::path(ex_ckpt).stem().string();
      const fs::path dir = or_default(ex_out, fs::path(cfg.output_dir) / "circuits" / name);
      fs::create_directories(dir);
      const auto result = extract_concept_circuits(*ck.params, data, concepts, cfg.circuit, name);
      const CompGraph graph = CompGraph::build(ck.params->config());
      for (std::size_t i = 0; i < result.circuits.size(); ++i) {
        const auto& c = result.circuits[i];
        char file[32];
        std::snprintf(file, sizeof file, "concept_%04d.json", c.concept_id);
        save_circuit(dir / file, c, graph);
        std::cout << "concept " << c.concept_id << ": " << c.k_edges << "/" << graph.edge_count() << " edges, faithfulness "
                  << c.faithfulness << ", held-out " << format_double(result.heldout[i])
                  << (c.degenerate ? " [degenerate]" : c.unfaithful ? " [unfaithful]" : "") << "\n";
      }
    } else if (*metrics) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(met_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      require(!files.empty(), "metrics: no circuit files in " + met_dir);
      std::vector<MetricRow> rows;
      for (const auto& f : files) {
        const Circuit c = load_circuit(f);
        ModelConfig mc;
        mc.n_layers = c.n_layers;
        mc.n_heads = c.n_heads;
        mc.d_model = 4 * c.n_heads;
        mc.vocab_size = 4;  // the graph depends only on layers and heads
        const CompGraph graph = CompGraph::build(mc);
        MetricRow r = make_metric_row(c, graph, step_of(c.checkpoint));
        if (met_directed) r.metrics.density = directed_density(c.edges, graph);
        rows.push_back(r);
      }
      write_metrics_csv(met_out, rows);
      std::cout << "wrote " << rows.size() << " rows to " << met_out << "\n";
    } else if (*an_deg) {
      const auto cfg = load_checked(config_path);
      const auto data = read_dataset(or_default(deg_data, fs::path(cfg.output_dir) / "data"));
      const auto a = load_checkpoint(deg_before);
      const auto b = load_checkpoint(deg_after);
      check_vocab(*a.params, data);
      const DegreeKind kind = deg_kind == "learning" ? DegreeKind::Learning : DegreeKind::Forgetting;
      const auto rep = compute_degrees(*a.params, *b.params, data.vocab, data.split.test, kind);
      write_degrees_csv(fs::path(deg_out) / ("degrees_" + deg_kind + ".csv"), rep);
      write_triple_degrees_csv(fs::path(deg_out) / ("triples_" + deg_kind + ".csv"), rep);
      std::cout << "mean " << deg_kind << " degree (logit) " << mean_degree(rep.logit) << " over " << rep.logit.size()
                << " concepts\n";
    } else if (*an_corr) {
      const auto degrees = read_degrees_csv(corr_degrees, corr_measure);
      SpearmanOptions sp;
      sp.seed = corr_seed;
      std::vector<CorrelationRow> rows;
      const std::string label = (degrees.empty() ? std::string("learning")
                                                 : std::string(degree_kind_name(degrees.front().kind))) +
                                "_" + corr_measure;
      if (!corr_against.empty()) {
        const auto other = read_degrees_csv(corr_against, corr_measure);
        const std::string other_label =
            (other.empty() ? std::string("forgetting") : std::string(degree_kind_name(other.front().kind))) + "_" +
            corr_measure;
        rows.push_back({label, other_label, "degree", correlate_degrees(degrees, other, sp)});
      }
      if (!corr_metrics.empty()) {
        auto mrows = read_metrics_csv(corr_metrics);
        if (!corr_ckpt.empty()) {
          std::erase_if(mrows, [&](const MetricRow& r) { return r.checkpoint != corr_ckpt; });
        }
        const auto res = correlate_degrees_with_metrics(degrees, mrows, sp);
        for (int m = 0; m < 4; ++m) rows.push_back({label, corr_join, kMetricNames[m], res[static_cast<std::size_t>(m)]});
      }
      require(!rows.empty(), "correlate: give --metrics and/or --against");
      write_correlations_csv(corr_out, rows);
      for (const auto& r : rows) {
        std::cout << r.degree << " vs " << r.metric << " (" << r.join << "): rho " << format_double(r.result.rho) << ", p "
                  << format_double(r.result.p_value) << ", n " << r.result.n << "\n";
      }
    } else if (*an_traj) {
      auto rows = read_metrics_csv(traj_metrics);
      std::erase_if(rows, [&](const MetricRow& r) { return r.checkpoint.rfind(traj_prefix, 0) != 0; });
      std::set<int> steps;
      for (const auto& r : rows) steps.insert(r.step);
      const std::vector<int> sv(steps.begin(), steps.end());
      const auto res = track_trajectories(sv, rows);
      write_trajectories_csv(traj_out, res);
      for (int m = 0; m < 4; ++m) {
        std::cout << kMetricNames[m] << ": mean peaks at step " << res.summary.peak_step[static_cast<std::size_t>(m)]
                  << (res.summary.post_peak_below[static_cast<std::size_t>(m)] ? ", declines after" : "") << "\n";
      }
    } else if (*inter) {
      const auto cfg = load_checked(config_path);
      const auto data = read_dataset(or_default(in_data, fs::path(cfg.output_dir) / "data"));
      const Parameters base = parameters_for(in_ckpt, cfg, data);
      check_vocab(base, data);
      const int k = in_k > 0 ? in_k : cfg.analysis.k;
      std::vector<int> targets = data.split.test_concepts;
      require(in_targets >= 1, "interference: --targets must be >= 1");
      if (static_cast<int>(targets.size()) > in_targets) targets.resize(static_cast<std::size_t>(in_targets));
      std::map<int, std::vector<double>> vectors;
      if (!in_vectors.empty()) vectors = read_concept_vectors(in_vectors);
      const auto names = split_names(in_groups);
      const auto plan = plan_interference(data.kb, targets, k, names, cfg.analysis.seeds, cfg.stage1.seed, {},
                                          in_vectors.empty() ? nullptr : &vectors);
      const auto results = run_interference_jobs(base, data.vocab, plan.jobs, data.split.train, data.split.test, cfg.stage1);
      write_interference_csv(in_out, results);
      std::map<std::pair<std::uint64_t, std::string>, std::pair<double, int>> agg;
      for (const auto& r : results) {
        auto& a = agg[{r.seed, r.group}];
        a.first += r.avg_logit;
        ++a.second;
      }
      for (const auto& [key, v] : agg) {
        std::cout << "seed " << key.first << " " << key.second << ": mean target logit " << v.first / v.second << "\n";
      }
    } else if (*transfer) {
      const auto cfg = load_checked(config_path);
      const auto data = read_dataset(or_default(tr_data, fs::path(cfg.output_dir) / "data"));
      const Parameters base = parameters_for(tr_ckpt, cfg, data);
      check_vocab(base, data);
      TransferConfig tc{cfg.stage1, cfg.stage2};
      if (tr_steps >= 0) tc.stage1.steps = tc.stage2.steps = tr_steps;
      const auto bio = encode_texts(data.vocab, data.bio, base.config().context_len);
      const auto m = run_transfer_matrix(base, data.vocab, data.split.train, data.split.test, bio, tc);
      write_transfer_csv(tr_out, m);
      std::cout << m.curriculum_runs << " curricula, " << m.control_runs << " control runs (stage1 seed "
                << tc.stage1.seed << ", stage2 seed " << tc.stage2.seed << ")\n";
      for (const auto& c : m.cells) {
        std::cout << category_name(c.source) << " -> " << category_name(c.target) << ": T = "
                  << (c.t ? format_double(*c.t) : std::string("undefined")) << "\n";
      }
    } else if (*pipe) {
      auto cfg = load_checked(config_path, false);
      if (!pipe_out.empty()) cfg.output_dir = pipe_out;
      const auto v = validate_config(cfg);
      if (!v.empty()) {
        std::string msg = "invalid config:";
        for (const auto& s : v) msg += "\n  " + s;
        throw ValidationFailure(msg);
      }
      const auto manifest = run_pipeline(cfg, &std::cerr);
      std::cout << "wrote " << manifest.files.size() << " files to " << cfg.output_dir << "\n";
    } else if (*validate) {
      if (print_default) {
        std::cout << config_to_json(ExperimentConfig{}).dump(2) << "\n";
        return 0;
      }
      load_checked(config_path);
      std::cout << "config ok\n";
    }
  } catch (const ValidationFailure& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
