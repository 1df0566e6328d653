#include <set>
#include <sstream>

#include "concept_circuits/concept_kb.hpp"
#include "concept_circuits/text.hpp"
#include "doctest.h"

using namespace cc;

namespace {

KnowledgeBase parse(const std::string& text, IngestOptions o = {}) {
  std::istringstream in(text);
  return parse_knowledge_graph(in, o);
}

KnowledgeBase synthetic(int concepts, int triples, std::uint64_t seed = 7) {
  SyntheticKgOptions s;
  s.concepts = concepts;
  s.retained_triples = triples;
  s.seed = seed;
  return parse(synthesize_knowledge_graph(s));
}

}  // namespace

TEST_CASE("relation mapping follows the category table") {
  CHECK(map_relation_category("IsA") == Category::HAH);
  CHECK(map_relation_category("LocatedNear") == Category::SR);
  CHECK(map_relation_category("EtymologicallyRelatedTo") == Category::Excluded);
  CHECK(map_relation_category("/r/PartOf") == Category::MAH);
  CHECK(map_relation_category("HasProperty") == Category::PAA);
  CHECK(map_relation_category("Antonym") == Category::SAA);
  CHECK(map_relation_category("NoSuchRelation") == Category::Excluded);
  CHECK_FALSE(is_known_relation("NoSuchRelation"));
  for (const auto& r : retained_relations()) CHECK(map_relation_category(r) != Category::Excluded);
}

TEST_CASE("ingestion retains, excludes and deduplicates") {
  const auto kb = parse("dog\tIsA\tanimal\ndog\tCauses\tbarking\ncat\tPartOf\tfamily\n");
  CHECK(kb.triples.size() == 2);
  CHECK(kb.report.excluded == 1);

  CHECK(parse("").triples.empty());

  const auto dup = parse("dog\tIsA\tanimal\ndog\tIsA\tanimal\n# comment\n\n");
  CHECK(dup.triples.size() == 1);
  CHECK(dup.report.duplicates == 1);
  CHECK(dup.report.comments == 1);
}

TEST_CASE("malformed lines name their line number") {
  try {
    parse("dog\tIsA\tanimal\nbroken line\n");
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("unknown relations follow the configured policy") {
  const auto kb = parse("dog\tFlies\tsky\ndog\tIsA\tanimal\n");
  CHECK(kb.triples.size() == 1);
  CHECK(kb.report.unknown_relation == 1);
  CHECK_FALSE(kb.report.warnings.empty());
  IngestOptions strict;
  strict.unknown_relation = UnknownRelationPolicy::Error;
  CHECK_THROWS(parse("dog\tFlies\tsky\n", strict));
}

TEST_CASE("fictional names are deterministic, distinct and rewritten in objects") {
  const auto kb = parse("dog\tIsA\tanimal\ncat\tSimilarTo\tdog\nanimal\tHasA\tcell\n");
  const auto a = assign_fictional_names(kb, 5);
  const auto b = assign_fictional_names(kb, 5);
  std::set<std::string> names;
  for (std::size_t i = 0; i < a.concepts.size(); ++i) {
    CHECK(a.concepts[i].fictional_name == b.concepts[i].fictional_name);
    names.insert(a.concepts[i].fictional_name);
  }
  CHECK(names.size() == a.concepts.size());

  // "cat SimilarTo dog": the object must carry dog's fictional name.
  std::string dog_name;
  for (const auto& c : a.concepts) {
    if (c.real_name == "dog") dog_name = c.fictional_name;
  }
  bool found = false;
  for (const auto& t : a.triples) {
    if (t.relation == "SimilarTo") {
      CHECK(t.object == dog_name);
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("a thousand concepts get a thousand distinct names") {
  const auto kb = assign_fictional_names(synthetic(1000, 3075), 3);
  std::set<std::string> names;
  for (const auto& c : kb.concepts) names.insert(c.fictional_name);
  CHECK(names.size() == 1000);
  const auto reserved = default_reserved_words();
  for (const auto& n : names) CHECK_FALSE(reserved.count(n));
}

TEST_CASE("name-space exhaustion is reported") {
  NamingOptions tiny;
  tiny.inventory.onsets = {"b"};
  tiny.inventory.vowels = {"a"};
  tiny.inventory.codas = {""};
  tiny.inventory.min_syllables = 1;
  tiny.inventory.max_syllables = 1;
  CHECK_THROWS_AS(assign_fictional_names(synthetic(30, 0), 1, tiny), std::exception);
}

TEST_CASE("template pools split each bank disjointly") {
  const auto pools = build_template_pools(retained_relations(), 50, 0.2, 9);
  for (const auto& rel : retained_relations()) {
    const auto& tr = pools.train_by_relation.at(rel);
    const auto& te = pools.test_by_relation.at(rel);
    CHECK(tr.size() == 40);
    CHECK(te.size() == 10);
    std::set<std::string> train_patterns;
    for (int id : tr) train_patterns.insert(pools.at(id).pattern);
    for (int id : te) CHECK_FALSE(train_patterns.count(pools.at(id).pattern));
    for (int id : tr) {
      const auto& p = pools.at(id).pattern;
      const auto first = p.find(kSlot);
      CHECK(first != std::string::npos);
      CHECK(p.find(kSlot, first + 1) == std::string::npos);
    }
  }
  const auto tiny = build_template_pools(retained_relations(), 2, 0.5, 9);
  CHECK(tiny.train_by_relation.at("IsA").size() == 1);
  CHECK(tiny.test_by_relation.at("IsA").size() == 1);
  CHECK_THROWS(build_template_pools(retained_relations(), 1, 0.5, 9));

  const auto again = build_template_pools(retained_relations(), 50, 0.2, 9);
  for (std::size_t i = 0; i < pools.templates.size(); ++i) CHECK(pools.templates[i].pattern == again.templates[i].pattern);
}

TEST_CASE("dataset arithmetic: resamples times triples, one test sample per test triple") {
  const auto kb = assign_fictional_names(synthetic(120, 0), 2);
  const auto pools = build_template_pools(retained_relations(), 50, 0.2, 4);
  const auto split = generate_dataset(kb, pools, 30, 40, 11);
  CHECK(split.train.size() == 30 * kb.triples.size());
  std::set<int> test_concepts(split.test_concepts.begin(), split.test_concepts.end());
  CHECK(test_concepts.size() == 40);
  std::size_t expected_test = 0;
  for (const auto& t : kb.triples) expected_test += test_concepts.count(t.subject);
  CHECK(split.test.size() == expected_test);
  for (const auto& s : split.test) {
    CHECK(pools.at(s.template_id).pool == Pool::Test);
    CHECK(test_concepts.count(s.concept_id));
  }
  for (const auto& s : split.train) CHECK(pools.at(s.template_id).pool == Pool::Train);
  CHECK_THROWS(generate_dataset(kb, pools, 30, 121, 11));
}

TEST_CASE("full-scale parameter set yields 92,250 training samples") {
  const auto kb = assign_fictional_names(synthetic(1000, 3075), 1);
  CHECK(kb.concepts.size() == 1000);
  CHECK(kb.triples.size() == 3075);
  const auto pools = build_template_pools(retained_relations(), 50, 0.2, 1);
  const auto split = generate_dataset(kb, pools, 30, 500, 1);
  CHECK(split.train.size() == 92250);
}

TEST_CASE("rendered samples concatenate to the full sentence") {
  const auto kb = assign_fictional_names(synthetic(20, 0), 2);
  const auto pools = build_template_pools(retained_relations(), 10, 0.2, 4);
  const auto split = generate_dataset(kb, pools, 2, 5, 1);
  for (const auto& s : split.train) {
    const auto& c = kb.concepts[static_cast<std::size_t>(s.concept_id)];
    const auto words = tokenize_words(s.prefix);
    CHECK(std::find(words.begin(), words.end(), c.fictional_name) != words.end());
    CHECK_FALSE(s.target.empty());
    CHECK(s.target == " " + kb.triples[static_cast<std::size_t>(s.triple_id)].object);
  }
}

TEST_CASE("biographies have four sentences per person") {
  const auto bio = generate_bio_corpus(10, 3);
  CHECK(bio.size() == 40);
  for (const auto& b : bio) CHECK(b.back() == '.');
  CHECK(generate_bio_corpus(10, 3) == bio);
}
