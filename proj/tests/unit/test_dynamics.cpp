#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "../support/fixtures.hpp"
#include "concept_circuits/common.hpp"
#include "concept_circuits/dynamics.hpp"
#include "concept_circuits/harness.hpp"
#include "doctest.h"

using namespace cc;

namespace {

KnowledgeRecord rec(int triple, int concept_id, double logit, double logprob, bool valid = true) {
  KnowledgeRecord r;
  r.triple_id = triple;
  r.concept_id = concept_id;
  r.logit = logit;
  r.logprob = logprob;
  r.valid = valid;
  return r;
}

MetricRow row(int concept_id, int step, double c, double d, double e, double k) {
  MetricRow r;
  r.concept_id = concept_id;
  r.step = step;
  r.metrics = {c, d, e, k};
  return r;
}

}  // namespace

TEST_CASE("learning and forgetting degrees are antisymmetric") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 3);
  for (int i = 0; i < 100; ++i) {
    const double a = n(rng), b = n(rng);
    CHECK(knowledge_degree(a, b, DegreeKind::Learning) == b - a);
    CHECK(knowledge_degree(a, b, DegreeKind::Forgetting) == -knowledge_degree(a, b, DegreeKind::Learning));
  }
  CHECK(concept_degree(std::vector<double>{1.0, 2.0, 6.0}) == 3.0);
  CHECK_THROWS(concept_degree(std::vector<double>{}));
}

TEST_CASE("concept degrees average valid triples only") {
  const std::vector<KnowledgeRecord> before = {rec(0, 0, 1.0, -2.0), rec(1, 0, 2.0, -1.0), rec(2, 1, 0.5, -3.0),
                                               rec(3, 1, 9.0, -9.0, false)};
  const std::vector<KnowledgeRecord> after = {rec(0, 0, 3.0, -1.0), rec(1, 0, 3.0, -0.5), rec(2, 1, 0.0, -3.5),
                                              rec(3, 1, 0.0, -0.0, false)};
  const auto r = degrees_from_records(before, after, DegreeKind::Learning);
  REQUIRE(r.logit.size() == 2);
  CHECK(r.logit[0].concept_id == 0);
  CHECK(r.logit[0].value == doctest::Approx(1.5));
  CHECK(r.logit[1].value == doctest::Approx(-0.5));
  CHECK(r.logprob[0].value == doctest::Approx(0.75));
  CHECK(r.excluded_records == 1);
  CHECK(r.logit[1].triple_ids == std::vector<int>{2});
  const auto f = degrees_from_records(before, after, DegreeKind::Forgetting);
  for (std::size_t i = 0; i < 2; ++i) CHECK(f.logit[i].value == -r.logit[i].value);
  CHECK(mean_degree(r.logit) == doctest::Approx(0.5));
}

TEST_CASE("relatedness groups follow a sort oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 30 + trial;
    const int k = 1 + trial % 10;
    std::vector<int> ranked(static_cast<std::size_t>(m));
    std::iota(ranked.begin(), ranked.end(), 100);
    std::shuffle(ranked.begin(), ranked.end(), rng);
    const auto g = split_ranked(7, ranked, k);
    CHECK(g.high == std::vector<int>(ranked.begin(), ranked.begin() + k));
    CHECK(g.weak == std::vector<int>(ranked.end() - k, ranked.end()));
    REQUIRE(g.moderate.size() == static_cast<std::size_t>(k));
    std::set<int> all(g.high.begin(), g.high.end());
    all.insert(g.moderate.begin(), g.moderate.end());
    all.insert(g.weak.begin(), g.weak.end());
    CHECK(all.size() == static_cast<std::size_t>(3 * k));
    // The moderate block is centred on the median rank.
    const auto pos = std::find(ranked.begin(), ranked.end(), g.moderate.front()) - ranked.begin();
    CHECK(std::abs((pos + k / 2.0) - m / 2.0) <= 1.0);
  }
  CHECK_THROWS_AS(split_ranked(0, std::vector<int>{1, 2, 3, 4, 5}, 2), InvalidArgument);
}

TEST_CASE("relatedness ranks by feature cosine") {
  KnowledgeBase kb;
  const std::vector<std::vector<std::string>> objs = {{"a", "b", "c"}, {"a", "b", "c"}, {"a", "b", "x"}, {"a", "y", "z"},
                                                      {"p", "q", "r"}, {"a", "b", "q"}, {"s", "t", "u"}};
  int tid = 0;
  for (int i = 0; i < static_cast<int>(objs.size()); ++i) {
    Concept c;
    c.id = i;
    kb.concepts.push_back(c);
    for (const auto& o : objs[static_cast<std::size_t>(i)]) {
      KnowledgeTriple t;
      t.id = tid++;
      t.subject = i;
      t.relation = "IsA";
      t.object = o;
      t.category = Category::HAH;
      kb.triples.push_back(t);
    }
  }
  const auto g = relatedness_groups(kb, 0, 2);
  CHECK(g.high == std::vector<int>{1, 2});  // cosines 1, 2/3
  CHECK(g.weak == std::vector<int>{4, 6});  // both 0, ties by id
  CHECK(cosine_sets(std::vector<int>{1, 2}, std::vector<int>{2, 3}) == doctest::Approx(0.5));
  CHECK(cosine_dense(std::vector<double>{1, 0}, std::vector<double>{0, 2}) == 0.0);
}

TEST_CASE("transferability fixtures") {
  CHECK(*paired_transferability(1.2, 1.0) == doctest::Approx(0.2));
  CHECK(*paired_transferability(1.0, 1.0) == 0.0);
  CHECK(*paired_transferability(0.5, -1.0) == doctest::Approx(1.5));
  CHECK_FALSE(paired_transferability(3.0, 1e-12).has_value());
}

TEST_CASE("trajectory peaks match an argmax oracle") {
  const std::vector<int> steps = {0, 10, 20, 30};
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<MetricRow> rows;
  for (int c = 0; c < 5; ++c) {
    for (int s : steps) {
      if (c == 4 && s == 20) continue;  // a gap
      rows.push_back(row(c, s, u(rng), u(rng), u(rng), u(rng)));
    }
  }
  const auto t = track_trajectories(steps, rows);
  REQUIRE(t.series.size() == 5);
  for (const auto& ts : t.series) {
    for (int m = 0; m < 4; ++m) {
      double best = -1;
      int best_step = -1;
      for (const auto& r : rows) {
        if (r.concept_id == ts.concept_id && metric_value(r.metrics, m) > best) {
          best = metric_value(r.metrics, m);
          best_step = r.step;
        }
      }
      CHECK(ts.peak_step[static_cast<std::size_t>(m)] == best_step);
    }
  }
  CHECK_FALSE(t.series[4].points[2].present);

  // Rising then falling mean density: peak at step 10, post-peak mean below it.
  const std::vector<MetricRow> arch = {row(0, 0, 0, 0.1, 0, 0), row(0, 10, 0, 0.9, 0, 0), row(0, 20, 0, 0.5, 0, 0),
                                       row(0, 30, 0, 0.2, 0, 0)};
  const auto a = track_trajectories(steps, arch);
  CHECK(a.summary.peak_step[1] == 10);
  CHECK(a.summary.post_peak_below[1]);
  CHECK_THROWS(track_trajectories(std::vector<int>{5}, arch));
  CHECK_THROWS(track_trajectories(std::vector<int>{5, 5}, arch));
}

TEST_CASE("degree and metric correlations join on concept id") {
  std::vector<DegreeRecord> deg;
  std::vector<MetricRow> rows;
  for (int c = 0; c < 8; ++c) {
    DegreeRecord d;
    d.concept_id = c;
    d.value = c * 1.5;
    deg.push_back(d);
    rows.push_back(row(7 - c, 0, c, -c, c * c, 1.0));  // reversed ids
  }
  rows.push_back(row(99, 0, 1, 1, 1, 1));  // no matching degree
  const auto r = correlate_degrees_with_metrics(deg, rows);
  CHECK(r[0].n == 8);
  CHECK(r[0].rho == doctest::Approx(-1.0));
  CHECK(r[1].rho == doctest::Approx(1.0));
  CHECK_FALSE(r[3].defined);
}

TEST_CASE("a small transfer matrix has 20 cells and 5 controls") {
  DatasetOptions d;
  d.synthetic_concepts = 40;
  d.resamples = 2;
  d.per_relation = 6;
  d.test_concepts = 15;
  d.bio_people = 6;
  d.seed = 3;
  const auto data = build_dataset(d);
  auto cfg = fixture::tiny_config(1, 2, 8, 16, 32, data.vocab.size());
  const auto base = init_parameters(cfg, 5);
  std::vector<TokenSeq> bio;
  for (const auto& b : data.bio) bio.push_back(encode_training_text(data.vocab, b, cfg.context_len));
  TransferConfig tc;
  tc.stage1.steps = 3;
  tc.stage1.batch_size = 4;
  tc.stage1.lr = 1e-3;
  tc.stage1.seed = 1;
  tc.stage2 = tc.stage1;
  tc.stage2.seed = 2;
  const auto m = run_transfer_matrix(base, data.vocab, data.split.train, data.split.test, bio, tc);
  CHECK(m.cells.size() == 20);
  CHECK(m.control_runs == 5);
  CHECK(m.curriculum_runs == 20);
  std::set<std::pair<int, int>> seen;
  for (const auto& c : m.cells) {
    CHECK(c.source != c.target);
    seen.insert({static_cast<int>(c.source), static_cast<int>(c.target)});
    CHECK(c.logit_after_bio == m.control_logit[static_cast<std::size_t>(c.target)]);
    if (c.t) {
      CHECK(*c.t == doctest::Approx((c.logit_after_source - c.logit_after_bio) / std::abs(c.logit_after_bio)));
      CHECK((*c.t > 0) == (c.logit_after_source > c.logit_after_bio));
    }
  }
  CHECK(seen.size() == 20);
}
