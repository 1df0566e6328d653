#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "concept_circuits/common.hpp"
#include "concept_circuits/dynamics.hpp"

namespace cc {

std::string_view degree_kind_name(DegreeKind k) { return k == DegreeKind::Learning ? "learning" : "forgetting"; }

double knowledge_degree(double before, double after, DegreeKind kind) {
  return kind == DegreeKind::Learning ? after - before : before - after;
}

double concept_degree(std::span<const double> per_triple) {
  require(!per_triple.empty(), "concept_degree: no triples");
  return mean(per_triple);
}

DegreeReport degrees_from_records(std::span<const KnowledgeRecord> before, std::span<const KnowledgeRecord> after,
                                  DegreeKind kind) {
  require(before.size() == after.size(), "degrees: record lists differ in length");
  DegreeReport r;
  r.kind = kind;
  r.before.assign(before.begin(), before.end());
  r.after.assign(after.begin(), after.end());
  std::map<int, DegreeRecord> logit, logprob;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& b = before[i];
    const auto& a = after[i];
    require(b.triple_id == a.triple_id, "degrees: record lists are not aligned");
    if (!b.valid || !a.valid) {
      ++r.excluded_records;
      continue;
    }
    for (auto* dst : {&logit, &logprob}) {
      auto& rec = (*dst)[b.concept_id];
      rec.concept_id = b.concept_id;
      rec.kind = kind;
      rec.triple_ids.push_back(b.triple_id);
    }
    logit[b.concept_id].per_triple.push_back(knowledge_degree(b.logit, a.logit, kind));
    logprob[b.concept_id].per_triple.push_back(knowledge_degree(b.logprob, a.logprob, kind));
  }
  for (auto* src : {&logit, &logprob}) {
    auto& out = src == &logit ? r.logit : r.logprob;
    for (auto& [id, rec] : *src) {
      rec.value = concept_degree(rec.per_triple);
      out.push_back(std::move(rec));
    }
  }
  return r;
}

DegreeReport compute_degrees(const Parameters& a, const Parameters& b, const Vocabulary& vocab,
                             std::span<const Sample> samples, DegreeKind kind) {
  require(a.config() == b.config(), "compute_degrees: checkpoints have different model configs");
  const auto before = evaluate_knowledge(a, vocab, samples);
  const auto after = evaluate_knowledge(b, vocab, samples);
  return degrees_from_records(before, after, kind);
}

double mean_degree(std::span<const DegreeRecord> records) {
  require(!records.empty(), "mean_degree: no records");
  double s = 0.0;
  for (const auto& r : records) s += r.value;
  return s / static_cast<double>(records.size());
}

MetricRow make_metric_row(const Circuit& c, const CompGraph& graph, int step) {
  MetricRow r;
  r.concept_id = c.concept_id;
  r.checkpoint = c.checkpoint;
  r.step = step;
  r.metrics = metric_vector(c, graph);
  r.k_edges = c.k_edges;
  r.faithfulness = c.faithfulness;
  r.unfaithful = c.unfaithful;
  return r;
}

std::array<CorrelationResult, 4> correlate_degrees_with_metrics(std::span<const DegreeRecord> degrees,
                                                                std::span<const MetricRow> metrics,
                                                                const SpearmanOptions& options) {
  std::map<int, const MetricRow*> by_concept;
  for (const auto& m : metrics) by_concept[m.concept_id] = &m;
  std::vector<double> xs;
  std::vector<const MetricRow*> joined;
  for (const auto& d : degrees) {
    auto it = by_concept.find(d.concept_id);
    if (it == by_concept.end()) continue;
    xs.push_back(d.value);
    joined.push_back(it->second);
  }
  if (xs.empty()) throw InvalidArgument("correlate: no concept appears in both the degrees and the metrics");
  if (xs.size() < 3) throw InvalidArgument("correlate: only " + std::to_string(xs.size()) + " concepts joined (need 3)");
  std::array<CorrelationResult, 4> out;
  for (int m = 0; m < 4; ++m) {
    std::vector<double> ys;
    for (const auto* row : joined) ys.push_back(metric_value(row->metrics, m));
    out[static_cast<std::size_t>(m)] = spearman(xs, ys, options);
  }
  return out;
}

CorrelationResult correlate_degrees(std::span<const DegreeRecord> a, std::span<const DegreeRecord> b,
                                    const SpearmanOptions& options) {
  std::map<int, double> bm;
  for (const auto& r : b) bm[r.concept_id] = r.value;
  std::vector<double> xs, ys;
  for (const auto& r : a) {
    auto it = bm.find(r.concept_id);
    if (it == bm.end()) continue;
    xs.push_back(r.value);
    ys.push_back(it->second);
  }
  if (xs.size() < 3) throw InvalidArgument("correlate: fewer than 3 concepts in the join");
  return spearman(xs, ys, options);
}

TrajectoryResult track_trajectories(std::span<const int> steps, std::span<const MetricRow> rows) {
  require(steps.size() >= 2, "track_trajectories: need at least 2 checkpoints");
  for (std::size_t i = 1; i < steps.size(); ++i) {
    require(steps[i] > steps[i - 1], "track_trajectories: steps must be strictly increasing");
  }
  std::map<int, std::map<int, MetricVector>> by_concept;
  for (const auto& r : rows) by_concept[r.concept_id][r.step] = r.metrics;

  TrajectoryResult out;
  out.summary.steps.assign(steps.begin(), steps.end());
  std::array<std::vector<double>, 4> sums;
  std::vector<int> counts(steps.size(), 0);
  for (auto& s : sums) s.assign(steps.size(), 0.0);

  for (const auto& [cid, pts] : by_concept) {
    TrajectorySeries ts;
    ts.concept_id = cid;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      TrajectoryPoint p;
      p.step = steps[i];
      auto it = pts.find(steps[i]);
      if (it != pts.end()) {
        p.present = true;
        p.metrics = it->second;
        ++counts[i];
        for (int m = 0; m < 4; ++m) sums[static_cast<std::size_t>(m)][i] += metric_value(p.metrics, m);
      }
      ts.points.push_back(p);
    }
    for (int m = 0; m < 4; ++m) {
      double best = -INFINITY;
      int best_step = steps.front();
      for (const auto& p : ts.points) {
        if (p.present && metric_value(p.metrics, m) > best) {
          best = metric_value(p.metrics, m);
          best_step = p.step;
        }
      }
      ts.peak_step[static_cast<std::size_t>(m)] = best_step;
    }
    out.series.push_back(std::move(ts));
  }

  for (int m = 0; m < 4; ++m) {
    auto& series = out.summary.mean_series[static_cast<std::size_t>(m)];
    series.assign(steps.size(), NAN);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (counts[i] > 0) series[i] = sums[static_cast<std::size_t>(m)][i] / counts[i];
    }
    std::size_t peak = steps.size();
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (!std::isnan(series[i]) && (peak == steps.size() || series[i] > series[peak])) peak = i;
    }
    if (peak == steps.size()) {
      out.summary.peak_step[static_cast<std::size_t>(m)] = steps.front();
      continue;
    }
    out.summary.peak_step[static_cast<std::size_t>(m)] = steps[peak];
    double post = 0.0;
    int n_post = 0;
    for (std::size_t i = peak + 1; i < steps.size(); ++i) {
      if (!std::isnan(series[i])) {
        post += series[i];
        ++n_post;
      }
    }
    out.summary.post_peak_below[static_cast<std::size_t>(m)] = n_post > 0 && post / n_post < series[peak];
  }
  return out;
}

std::vector<std::vector<int>> concept_feature_sets(const KnowledgeBase& kb) {
  std::map<std::pair<std::string, std::string>, int> feature_id;
  std::vector<std::vector<int>> sets(kb.concepts.size());
  for (const auto& t : kb.triples) {
    auto [it, inserted] = feature_id.try_emplace({t.relation, t.object}, static_cast<int>(feature_id.size()));
    sets[static_cast<std::size_t>(t.subject)].push_back(it->second);
  }
  for (auto& s : sets) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return sets;
}

double cosine_sets(std::span<const int> a, std::span<const int> b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(inter) / std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

double cosine_dense(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "cosine: vectors differ in dimension");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

std::map<int, std::vector<double>> read_concept_vectors(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open vector file " + path.string());
  std::map<int, std::vector<double>> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int id = 0;
    if (!(ls >> id)) throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": missing concept id");
    std::vector<double> v;
    double x = 0.0;
    while (ls >> x) v.push_back(x);
    if (!ls.eof()) throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": bad number");
    if (v.empty()) throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": empty vector");
    if (dim == 0) dim = v.size();
    if (v.size() != dim) throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": inconsistent dimension");
    out[id] = std::move(v);
  }
  return out;
}

RelatednessGroups split_ranked(int target, std::span<const int> ranked, int k) {
  require(k >= 1, "relatedness: K must be >= 1");
  const int m = static_cast<int>(ranked.size());
  if (m < 3 * k) {
    throw InvalidArgument("relatedness: " + std::to_string(m + 1) + " concepts is too few for K=" + std::to_string(k) +
                          " (need at least " + std::to_string(3 * k + 1) + ")");
  }
  RelatednessGroups g;
  g.target = target;
  const int start = std::clamp((m - k) / 2, k, m - 2 * k);
  g.high.assign(ranked.begin(), ranked.begin() + k);
  g.moderate.assign(ranked.begin() + start, ranked.begin() + start + k);
  g.weak.assign(ranked.end() - k, ranked.end());
  return g;
}

RelatednessGroups relatedness_groups(const KnowledgeBase& kb, int target, int k, std::span<const int> candidates,
                                     const std::map<int, std::vector<double>>* vectors) {
  require(target >= 0 && static_cast<std::size_t>(target) < kb.concepts.size(), "relatedness: unknown target concept");
  std::vector<int> pool;
  if (candidates.empty()) {
    for (const auto& c : kb.concepts) pool.push_back(c.id);
  } else {
    pool.assign(candidates.begin(), candidates.end());
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  pool.erase(std::remove(pool.begin(), pool.end(), target), pool.end());

  std::vector<double> sim(pool.size());
  if (vectors) {
    auto find = [&](int id) -> const std::vector<double>& {
      auto it = vectors->find(id);
      if (it == vectors->end()) throw InvalidArgument("relatedness: no external vector for concept " + std::to_string(id));
      return it->second;
    };
    const auto& tv = find(target);
    for (std::size_t i = 0; i < pool.size(); ++i) sim[i] = cosine_dense(tv, find(pool[i]));
  } else {
    const auto sets = concept_feature_sets(kb);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      sim[i] = cosine_sets(sets[static_cast<std::size_t>(target)], sets[static_cast<std::size_t>(pool[i])]);
    }
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
  std::vector<int> ranked;
  for (auto i : order) ranked.push_back(pool[i]);
  return split_ranked(target, ranked, k);
}

}  // namespace cc
