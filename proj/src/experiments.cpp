#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "concept_circuits/common.hpp"
#include "concept_circuits/dynamics.hpp"
#include "concept_circuits/parallel.hpp"

namespace cc {

namespace {

std::vector<Sample> samples_of(std::span<const Sample> samples, const std::set<int>& concepts) {
  std::vector<Sample> out;
  for (const auto& s : samples) {
    if (concepts.count(s.concept_id)) out.push_back(s);
  }
  return out;
}

std::vector<Sample> samples_of(std::span<const Sample> samples, Category c) {
  std::vector<Sample> out;
  for (const auto& s : samples) {
    if (s.category == c) out.push_back(s);
  }
  return out;
}

double mean_valid_logit(const Parameters& params, const Vocabulary& vocab, std::span<const Sample> samples) {
  const auto recs = evaluate_knowledge(params, vocab, samples);
  double s = 0.0;
  int n = 0;
  for (const auto& r : recs) {
    if (!r.valid) continue;
    s += r.logit;
    ++n;
  }
  if (n == 0) throw InvalidArgument("no evaluable samples (every target is out of vocabulary)");
  return s / n;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  return os;
}

}  // namespace

InterferenceResult run_interference(const Parameters& base, const Vocabulary& vocab, int target,
                                    std::span<const int> group, std::span<const Sample> train,
                                    std::span<const Sample> test, const TrainConfig& config,
                                    const std::string& group_name) {
  require(!group.empty(), "run_interference: the concept group is empty");
  std::set<int> concepts(group.begin(), group.end());
  require(!concepts.count(target), "run_interference: the group contains the target");
  concepts.insert(target);
  const auto train_samples = samples_of(train, concepts);
  const auto eval_samples = samples_of(test, std::set<int>{target});
  require(!train_samples.empty(), "run_interference: no train samples for the target and group");
  require(!eval_samples.empty(), "run_interference: target concept " + std::to_string(target) + " has no test samples");

  const auto seqs = encode_samples(vocab, train_samples, base.config().context_len);
  const auto ckpts = train_stage(base, seqs, config, Stage::Stage1);
  const auto recs = evaluate_knowledge(*ckpts.back().params, vocab, eval_samples);
  InterferenceResult r;
  r.target = target;
  r.group = group_name;
  r.seed = config.seed;
  for (const auto& rec : recs) {
    if (!rec.valid) continue;
    r.avg_logit += rec.logit;
    r.avg_prob += rec.prob;
    ++r.evaluated;
  }
  if (r.evaluated == 0) throw InvalidArgument("run_interference: no evaluable test samples for the target");
  r.avg_logit /= r.evaluated;
  r.avg_prob /= r.evaluated;
  return r;
}

std::vector<InterferenceResult> run_interference_jobs(const Parameters& base, const Vocabulary& vocab,
                                                      std::span<const InterferenceJob> jobs,
                                                      std::span<const Sample> train, std::span<const Sample> test,
                                                      const TrainConfig& config) {
  std::vector<InterferenceResult> out(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    TrainConfig c = config;
    c.seed = jobs[i].seed;
    out[i] = run_interference(base, vocab, jobs[i].target, jobs[i].group, train, test, c, jobs[i].group_name);
  });
  return out;
}

InterferencePlan plan_interference(const KnowledgeBase& kb, std::span<const int> targets, int k,
                                   std::span<const std::string> group_names, std::span<const std::uint64_t> seeds,
                                   std::uint64_t train_seed, std::span<const int> candidates,
                                   const std::map<int, std::vector<double>>* vectors) {
  require(!targets.empty(), "interference: no target concepts");
  require(!group_names.empty(), "interference: no groups requested");
  for (const auto& g : group_names) {
    require(g == "high" || g == "moderate" || g == "weak", "interference: unknown group '" + g + "'");
  }
  InterferencePlan plan;
  for (int t : targets) plan.groups.push_back(relatedness_groups(kb, t, k, candidates, vectors));
  for (auto seed : seeds) {
    for (const auto& g : plan.groups) {
      for (const auto& name : group_names) {
        const auto& members = name == "high" ? g.high : name == "moderate" ? g.moderate : g.weak;
        plan.jobs.push_back({g.target, name, members, mix_seed(train_seed, seed)});
      }
    }
  }
  return plan;
}

std::optional<double> mean_group_jaccard(const std::map<int, Circuit>& circuits, int target,
                                         std::span<const int> group) {
  auto t = circuits.find(target);
  if (t == circuits.end()) return std::nullopt;
  double s = 0.0;
  int n = 0;
  for (int g : group) {
    auto it = circuits.find(g);
    if (it == circuits.end()) continue;
    s += jaccard_edges(t->second, it->second);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return s / n;
}

std::optional<double> paired_transferability(double logit_after_ri, double logit_after_bio) {
  if (!(std::abs(logit_after_bio) > 1e-9)) return std::nullopt;
  return (logit_after_ri - logit_after_bio) / std::abs(logit_after_bio);
}

TransferMatrix run_transfer_matrix(const Parameters& base, const Vocabulary& vocab, std::span<const Sample> train,
                                   std::span<const Sample> test, std::span<const TokenSeq> bio,
                                   const TransferConfig& config) {
  require(!bio.empty(), "transfer: the control corpus is empty");
  const int ctx = base.config().context_len;
  constexpr std::size_t kCats = kRetainedCategories.size();
  std::array<std::vector<TokenSeq>, kCats> train_seqs;
  std::array<std::vector<Sample>, kCats> test_sets;
  for (std::size_t c = 0; c < kCats; ++c) {
    const Category cat = kRetainedCategories[c];
    const auto tr = samples_of(train, cat);
    test_sets[c] = samples_of(test, cat);
    if (tr.empty() || test_sets[c].empty()) {
      throw InvalidArgument("transfer: category " + std::string(category_name(cat)) + " has no train or test samples");
    }
    train_seqs[c] = encode_samples(vocab, tr, ctx);
  }

  // Stage 1: one run per source category plus the control (index kCats).
  std::vector<std::shared_ptr<const Parameters>> stage1(kCats + 1);
  parallel_for(kCats + 1, [&](std::size_t i) {
    TrainConfig c = config.stage1;
    c.seed = mix_seed(config.stage1.seed, i);
    std::span<const TokenSeq> data = i < kCats ? std::span<const TokenSeq>(train_seqs[i]) : bio;
    stage1[i] = train_stage(base, data, c, Stage::Stage1).back().params;
  });

  // Stage 2: every (source, target) pair with source != target, plus the control per target.
  // The seed depends only on the target so curricula differ only in their first stage.
  struct Job {
    std::size_t source;  // kCats = control
    std::size_t target;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s <= kCats; ++s) {
    for (std::size_t t = 0; t < kCats; ++t) {
      if (s != t) jobs.push_back({s, t});
    }
  }
  std::vector<double> logits(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    TrainConfig c = config.stage2;
    c.seed = mix_seed(config.stage2.seed, jobs[i].target);
    const auto ck = train_stage(*stage1[jobs[i].source], train_seqs[jobs[i].target], c, Stage::Stage2);
    logits[i] = mean_valid_logit(*ck.back().params, vocab, test_sets[jobs[i].target]);
  });

  TransferMatrix m;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (jobs[i].source == kCats) {
      m.control_logit[jobs[i].target] = logits[i];
      ++m.control_runs;
    }
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (jobs[i].source == kCats) continue;
    TransferCell cell;
    cell.source = kRetainedCategories[jobs[i].source];
    cell.target = kRetainedCategories[jobs[i].target];
    cell.logit_after_source = logits[i];
    cell.logit_after_bio = m.control_logit[jobs[i].target];
    cell.t = paired_transferability(cell.logit_after_source, cell.logit_after_bio);
    m.cells.push_back(cell);
    ++m.curriculum_runs;
  }
  return m;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_degrees_csv(const std::filesystem::path& path, const DegreeReport& report) {
  auto os = open_csv(path);
  os << "concept_id,kind,measure,value,n_triples\n";
  for (const auto* list : {&report.logit, &report.logprob}) {
    const char* measure = list == &report.logit ? "logit" : "logprob";
    for (const auto& r : *list) {
      os << r.concept_id << ',' << degree_kind_name(r.kind) << ',' << measure << ',' << format_double(r.value) << ','
         << r.per_triple.size() << '\n';
    }
  }
}

void write_triple_degrees_csv(const std::filesystem::path& path, const DegreeReport& report) {
  auto os = open_csv(path);
  os << "triple_id,concept_id,category,valid,logit_before,logit_after,logprob_before,logprob_after,degree_logit,"
        "degree_logprob\n";
  for (std::size_t i = 0; i < report.before.size(); ++i) {
    const auto& b = report.before[i];
    const auto& a = report.after[i];
    os << b.triple_id << ',' << b.concept_id << ',' << category_name(b.category) << ',' << (b.valid && a.valid) << ','
       << format_double(b.logit) << ',' << format_double(a.logit) << ',' << format_double(b.logprob) << ','
       << format_double(a.logprob) << ',' << format_double(knowledge_degree(b.logit, a.logit, report.kind)) << ','
       << format_double(knowledge_degree(b.logprob, a.logprob, report.kind)) << '\n';
  }
}

std::vector<DegreeRecord> read_degrees_csv(const std::filesystem::path& path, const std::string& measure) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open degrees file " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<DegreeRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": expected 5 columns");
    if (f[2] != measure) continue;
    try {
      DegreeRecord r;
      r.concept_id = std::stoi(f[0]);
      r.kind = f[1] == "forgetting" ? DegreeKind::Forgetting : DegreeKind::Learning;
      r.value = std::stod(f[3]);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows) {
  auto os = open_csv(path);
  os << "concept_id,checkpoint,step,centrality_std,density,global_efficiency,avg_kcore,k_edges,faithfulness,unfaithful\n";
  for (const auto& r : rows) {
    os << r.concept_id << ',' << r.checkpoint << ',' << r.step << ',' << format_double(r.metrics.centrality_std) << ','
       << format_double(r.metrics.density) << ',' << format_double(r.metrics.global_efficiency) << ','
       << format_double(r.metrics.avg_kcore) << ',' << r.k_edges << ',' << format_double(r.faithfulness) << ','
       << (r.unfaithful ? 1 : 0) << '\n';
  }
}

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open metrics file " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<MetricRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": expected 10 columns");
    try {
      MetricRow r;
      r.concept_id = std::stoi(f[0]);
      r.checkpoint = f[1];
      r.step = std::stoi(f[2]);
      r.metrics.centrality_std = std::stod(f[3]);
      r.metrics.density = std::stod(f[4]);
      r.metrics.global_efficiency = std::stod(f[5]);
      r.metrics.avg_kcore = std::stod(f[6]);
      r.k_edges = std::stoi(f[7]);
      r.faithfulness = std::stod(f[8]);
      r.unfaithful = f[9] == "1";
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

void write_correlations_csv(const std::filesystem::path& path, std::span<const CorrelationRow> rows) {
  auto os = open_csv(path);
  os << "degree,join,metric,rho,p_value,n,method,defined\n";
  for (const auto& r : rows) {
    os << r.degree << ',' << r.join << ',' << r.metric << ',' << format_double(r.result.rho) << ','
       << format_double(r.result.p_value) << ',' << r.result.n << ',' << pvalue_method_name(r.result.method) << ','
       << (r.result.defined ? 1 : 0) << '\n';
  }
}

void write_trajectories_csv(const std::filesystem::path& path, const TrajectoryResult& result) {
  auto os = open_csv(path);
  os << "concept_id,step,present,centrality_std,density,global_efficiency,avg_kcore\n";
  auto row = [&](const std::string& id, int step, bool present, const MetricVector& m) {
    os << id << ',' << step << ',' << (present ? 1 : 0) << ',' << format_double(m.centrality_std) << ','
       << format_double(m.density) << ',' << format_double(m.global_efficiency) << ',' << format_double(m.avg_kcore)
       << '\n';
  };
  for (const auto& s : result.series) {
    for (const auto& p : s.points) row(std::to_string(s.concept_id), p.step, p.present, p.metrics);
  }
  const auto& sum = result.summary;
  for (std::size_t i = 0; i < sum.steps.size(); ++i) {
    MetricVector m{sum.mean_series[0][i], sum.mean_series[1][i], sum.mean_series[2][i], sum.mean_series[3][i]};
    row("mean", sum.steps[i], true, m);
  }
}

void write_interference_csv(const std::filesystem::path& path, std::span<const InterferenceResult> rows) {
  auto os = open_csv(path);
  os << "target,group,seed,avg_logit,avg_prob,evaluated\n";
  for (const auto& r : rows) {
    os << r.target << ',' << r.group << ',' << r.seed << ',' << format_double(r.avg_logit) << ','
       << format_double(r.avg_prob) << ',' << r.evaluated << '\n';
  }
}

void write_transfer_csv(const std::filesystem::path& path, const TransferMatrix& m) {
  auto os = open_csv(path);
  os << "source,target,logit_after_source,logit_after_bio,T,defined\n";
  for (const auto& c : m.cells) {
    os << category_name(c.source) << ',' << category_name(c.target) << ',' << format_double(c.logit_after_source)
       << ',' << format_double(c.logit_after_bio) << ',' << (c.t ? format_double(*c.t) : "nan") << ','
       << (c.t ? 1 : 0) << '\n';
  }
}

}  // namespace cc
