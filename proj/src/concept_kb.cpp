#include "concept_circuits/concept_kb.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "concept_circuits/common.hpp"
#include "concept_circuits/text.hpp"

namespace cc {

namespace {

struct RelationRow {
  const char* name;
  Category category;
};

// Retained families first, then the excluded families.
constexpr RelationRow kRelationTable[] = {
    {"IsA", Category::HAH},
    {"DefinedAs", Category::HAH},
    {"FormOf", Category::HAH},
    {"InstanceOf", Category::HAH},
    {"Synonym", Category::SAA},
    {"SimilarTo", Category::SAA},
    {"Antonym", Category::SAA},
    {"DistinctFrom", Category::SAA},
    {"PartOf", Category::MAH},
    {"HasA", Category::MAH},
    {"MadeOf", Category::MAH},
    {"HasProperty", Category::PAA},
    {"UsedFor", Category::PAA},
    {"CapableOf", Category::PAA},
    {"ReceivesAction", Category::PAA},
    {"AtLocation", Category::SR},
    {"LocatedNear", Category::SR},
    // Causality & event
    {"Causes", Category::Excluded},
    {"MotivatedByGoal", Category::Excluded},
    {"HasPrerequisite", Category::Excluded},
    {"HasSubevent", Category::Excluded},
    {"HasFirstSubevent", Category::Excluded},
    {"HasLastSubevent", Category::Excluded},
    {"CreatedBy", Category::Excluded},
    // Desire
    {"Desires", Category::Excluded},
    {"CausesDesire", Category::Excluded},
    // Lexical / etymological
    {"DerivedFrom", Category::Excluded},
    {"EtymologicallyDerivedFrom", Category::Excluded},
    {"EtymologicallyRelatedTo", Category::Excluded},
    // Other
    {"RelatedTo", Category::Excluded},
    {"HasContext", Category::Excluded},
    {"ExternalURL", Category::Excluded},
    {"SymbolOf", Category::Excluded},
};

std::string_view strip_uri(std::string_view relation) {
  if (relation.starts_with("/r/")) relation.remove_prefix(3);
  return relation;
}

const RelationRow* find_relation(std::string_view relation) {
  relation = strip_uri(relation);
  for (const auto& row : kRelationTable) {
    if (relation == row.name) return &row;
  }
  return nullptr;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::vector<std::string> split_spaces(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream is{std::string(text)};
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void add_lower_words(std::string_view text, std::set<std::string>& out) {
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(cur);
}

}  // namespace

std::string_view category_name(Category c) {
  switch (c) {
    case Category::HAH: return "HAH";
    case Category::SAA: return "SAA";
    case Category::MAH: return "MAH";
    case Category::PAA: return "PAA";
    case Category::SR: return "SR";
    case Category::Excluded: return "EXCLUDED";
  }
  return "EXCLUDED";
}

std::optional<Category> parse_category(std::string_view name) {
  for (Category c : {Category::HAH, Category::SAA, Category::MAH, Category::PAA, Category::SR, Category::Excluded}) {
    if (category_name(c) == name) return c;
  }
  return std::nullopt;
}

Category map_relation_category(std::string_view relation) {
  const RelationRow* row = find_relation(relation);
  return row ? row->category : Category::Excluded;
}

bool is_known_relation(std::string_view relation) { return find_relation(relation) != nullptr; }

const std::vector<std::string>& retained_relations() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& row : kRelationTable) {
      if (row.category != Category::Excluded) v.emplace_back(row.name);
    }
    return v;
  }();
  return names;
}

std::vector<std::vector<int>> KnowledgeBase::triples_by_concept() const {
  std::vector<std::vector<int>> out(concepts.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    out.at(static_cast<std::size_t>(triples[i].subject)).push_back(static_cast<int>(i));
  }
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

KnowledgeBase parse_knowledge_graph(std::istream& in, const IngestOptions& options) {
  KnowledgeBase kb;
  std::unordered_map<std::string, int> concept_index;
  std::set<std::tuple<int, std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    ++kb.report.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = normalize_whitespace(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '#') {
      ++kb.report.comments;
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 3 && fields.size() != 4) {
      throw InvalidArgument("line " + std::to_string(line_no) + ": expected 3 or 4 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    const std::string subject = normalize_whitespace(fields[0]);
    const std::string relation{strip_uri(normalize_whitespace(fields[1]))};
    const std::string object = normalize_whitespace(fields[2]);
    if (subject.empty() || relation.empty() || object.empty()) {
      throw InvalidArgument("line " + std::to_string(line_no) + ": empty subject, relation or object");
    }
    std::optional<Concreteness> concreteness;
    if (fields.size() == 4) {
      const std::string tag = to_lower(normalize_whitespace(fields[3]));
      if (tag == "concrete") {
        concreteness = Concreteness::Concrete;
      } else if (tag == "abstract") {
        concreteness = Concreteness::Abstract;
      } else if (!tag.empty()) {
        throw InvalidArgument("line " + std::to_string(line_no) + ": concreteness must be 'concrete' or 'abstract'");
      }
    }

    if (!is_known_relation(relation)) {
      if (options.unknown_relation == UnknownRelationPolicy::Error) {
        throw InvalidArgument("line " + std::to_string(line_no) + ": unknown relation '" + relation + "'");
      }
      ++kb.report.unknown_relation;
      kb.report.warnings.push_back("line " + std::to_string(line_no) + ": unknown relation '" + relation +
                                   "' dropped");
      continue;
    }
    const Category category = map_relation_category(relation);
    if (category == Category::Excluded) {
      ++kb.report.excluded;
      continue;
    }

    auto it = concept_index.find(subject);
    if (it == concept_index.end()) {
      if (options.max_concepts != 0 && kb.concepts.size() >= options.max_concepts) {
        ++kb.report.beyond_concept_limit;
        continue;
      }
      Concept c;
      c.id = static_cast<int>(kb.concepts.size());
      c.real_name = subject;
      c.concreteness = concreteness;
      it = concept_index.emplace(subject, c.id).first;
      kb.concepts.push_back(std::move(c));
    } else if (!kb.concepts[static_cast<std::size_t>(it->second)].concreteness) {
      kb.concepts[static_cast<std::size_t>(it->second)].concreteness = concreteness;
    }
    if (!seen.emplace(it->second, relation, object).second) {
      ++kb.report.duplicates;
      continue;
    }
    KnowledgeTriple t;
    t.id = static_cast<int>(kb.triples.size());
    t.subject = it->second;
    t.relation = relation;
    t.object = object;
    t.category = category;
    kb.triples.push_back(std::move(t));
  }
  kb.report.retained = kb.triples.size();
  return kb;
}

KnowledgeBase load_knowledge_graph(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open knowledge graph file: " + path.string());
  return parse_knowledge_graph(in, options);
}

// ---------------------------------------------------------------------------
// Fictional names

std::uint64_t NameInventory::capacity() const {
  const std::set<std::string> distinct_codas(codas.begin(), codas.end());
  const long double per_syllable = static_cast<long double>(onsets.size()) * vowels.size();
  long double total = 0;
  for (int s = min_syllables; s <= max_syllables; ++s) {
    total += std::pow(per_syllable, s) * static_cast<long double>(distinct_codas.size());
    if (total > 1e18L) return static_cast<std::uint64_t>(1e18);
  }
  return static_cast<std::uint64_t>(total);
}

std::set<std::string> default_reserved_words() {
  std::set<std::string> words = bio_lexicon();
  for (const auto& rel : retained_relations()) {
    for (const auto& pattern : builtin_template_bank(rel)) add_lower_words(pattern, words);
  }
  words.insert("concept");
  return words;
}

KnowledgeBase assign_fictional_names(KnowledgeBase kb, std::uint64_t seed, const NamingOptions& options) {
  const NameInventory& inv = options.inventory;
  require(!inv.onsets.empty() && !inv.vowels.empty() && !inv.codas.empty(), "name inventory has an empty list");
  require(inv.min_syllables >= 1 && inv.max_syllables >= inv.min_syllables, "bad syllable range in name inventory");

  std::set<std::string> forbidden = options.reserved;
  for (const auto& c : kb.concepts) add_lower_words(c.real_name, forbidden);
  for (const auto& t : kb.triples) add_lower_words(t.object, forbidden);

  if (kb.concepts.size() > inv.capacity()) {
    throw InvalidArgument("name inventory can produce at most " + std::to_string(inv.capacity()) +
                          " names but the knowledge base has " + std::to_string(kb.concepts.size()) +
                          " concepts; use a larger syllable inventory");
  }

  std::mt19937_64 rng(mix_seed(seed, 0x6e616d65));
  auto pick = [&rng](const std::vector<std::string>& v) -> const std::string& {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto syllable = [&]() { return pick(inv.onsets) + pick(inv.vowels); };

  std::unordered_set<std::string> used;
  constexpr int kDraws = 16;
  constexpr int kSuffixes = 4;
  for (auto& concept_ : kb.concepts) {
    std::string name;
    bool ok = false;
    for (int attempt = 0; attempt < kDraws && !ok; ++attempt) {
      const int n = std::uniform_int_distribution<int>(inv.min_syllables, inv.max_syllables)(rng);
      name.clear();
      for (int s = 0; s < n; ++s) name += syllable();
      name += pick(inv.codas);
      ok = !used.contains(name) && !forbidden.contains(name);
    }
    // Retry with suffix syllables.
    for (int s = 0; s < kSuffixes && !ok; ++s) {
      name += syllable();
      ok = !used.contains(name) && !forbidden.contains(name);
    }
    if (!ok) {
      throw InvalidArgument("name inventory exhausted after " + std::to_string(used.size()) +
                            " names; use a larger syllable inventory");
    }
    used.insert(name);
    concept_.fictional_name = name;
  }

  // Rewrite object phrases: greedy longest match of concept real names on word boundaries.
  std::map<std::vector<std::string>, std::string> by_words;
  std::size_t max_words = 0;
  for (const auto& c : kb.concepts) {
    auto words = split_spaces(c.real_name);
    max_words = std::max(max_words, words.size());
    by_words.emplace(std::move(words), c.fictional_name);
  }
  for (auto& t : kb.triples) {
    const auto words = split_spaces(t.object);
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < words.size()) {
      bool matched = false;
      for (std::size_t len = std::min(max_words, words.size() - i); len >= 1; --len) {
        std::vector<std::string> key(words.begin() + static_cast<std::ptrdiff_t>(i),
                                     words.begin() + static_cast<std::ptrdiff_t>(i + len));
        auto it = by_words.find(key);
        if (it != by_words.end()) {
          out.push_back(it->second);
          i += len;
          matched = true;
          break;
        }
      }
      if (!matched) out.push_back(words[i++]);
    }
    std::string joined;
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (k) joined += ' ';
      joined += out[k];
    }
    t.object = joined;
  }
  return kb;
}

// ---------------------------------------------------------------------------
// Samples

Sample render_sample(const KnowledgeTriple& triple, const Concept& subject, const Template& tmpl, Split split) {
  if (tmpl.relation != triple.relation) {
    throw InvalidArgument("template " + std::to_string(tmpl.id) + " is for relation '" + tmpl.relation +
                          "' but triple " + std::to_string(triple.id) + " has relation '" + triple.relation + "'");
  }
  const std::size_t slot = tmpl.pattern.find(kSlot);
  require(slot != std::string::npos, "template " + std::to_string(tmpl.id) + " has no slot");
  std::string filled = tmpl.pattern;
  filled.replace(slot, kSlot.size(), subject.fictional_name);
  Sample s;
  s.triple_id = triple.id;
  s.template_id = tmpl.id;
  s.concept_id = subject.id;
  s.prefix = normalize_whitespace(filled);
  s.target = " " + normalize_whitespace(triple.object);
  s.split = split;
  s.category = triple.category;
  return s;
}

std::vector<int> choose_test_concepts(const KnowledgeBase& kb, int count, std::uint64_t seed) {
  require(count >= 0, "test concept count must be non-negative");
  if (static_cast<std::size_t>(count) > kb.concepts.size()) {
    throw InvalidArgument("test concept count " + std::to_string(count) + " exceeds the " +
                          std::to_string(kb.concepts.size()) + " concepts in the knowledge base");
  }
  std::vector<int> ids(kb.concepts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  std::mt19937_64 rng(mix_seed(seed, 0x74657374));
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

KnowledgeBase mark_test_split(KnowledgeBase kb, const std::vector<int>& test_concepts) {
  for (auto& c : kb.concepts) c.split = ConceptSplit::TrainOnly;
  for (int id : test_concepts) kb.concepts.at(static_cast<std::size_t>(id)).split = ConceptSplit::TrainAndTest;
  return kb;
}

namespace {
std::size_t count_tokens(const Sample& s) { return tokenize_words(s.prefix).size() + tokenize_words(s.target).size(); }
}  // namespace

DatasetSplit generate_dataset(const KnowledgeBase& kb, const TemplatePools& pools, int resamples_per_triple,
                              int test_concept_count, std::uint64_t seed) {
  require(resamples_per_triple >= 1, "resamples_per_triple must be at least 1");
  DatasetSplit out;
  out.test_concepts = choose_test_concepts(kb, test_concept_count, seed);

  std::mt19937_64 train_rng(mix_seed(seed, 1));
  out.train.reserve(kb.triples.size() * static_cast<std::size_t>(resamples_per_triple));
  std::set<int> train_concepts;
  for (const auto& t : kb.triples) {
    auto it = pools.train_by_relation.find(t.relation);
    if (it == pools.train_by_relation.end() || it->second.empty()) {
      throw InvalidArgument("no train templates for relation '" + t.relation + "'");
    }
    const auto& pool = it->second;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const Concept& subject = kb.concepts.at(static_cast<std::size_t>(t.subject));
    for (int r = 0; r < resamples_per_triple; ++r) {
      out.train.push_back(render_sample(t, subject, pools.at(pool[pick(train_rng)]), Split::Train));
    }
    train_concepts.insert(t.subject);
    ++out.stats.train_triples;
  }

  std::mt19937_64 test_rng(mix_seed(seed, 2));
  const auto by_concept = kb.triples_by_concept();
  for (int cid : out.test_concepts) {
    for (int ti : by_concept[static_cast<std::size_t>(cid)]) {
      const auto& t = kb.triples[static_cast<std::size_t>(ti)];
      auto it = pools.test_by_relation.find(t.relation);
      if (it == pools.test_by_relation.end() || it->second.empty()) {
        throw InvalidArgument("no test templates for relation '" + t.relation + "'");
      }
      std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
      out.test.push_back(render_sample(t, kb.concepts[static_cast<std::size_t>(cid)],
                                       pools.at(it->second[pick(test_rng)]), Split::Test));
    }
  }

  out.stats.train_concepts = train_concepts.size();
  out.stats.test_concepts = out.test_concepts.size();
  out.stats.test_triples = out.test.size();
  out.stats.train_samples = out.train.size();
  out.stats.test_samples = out.test.size();
  for (const auto& s : out.train) out.stats.train_tokens += count_tokens(s);
  for (const auto& s : out.test) out.stats.test_tokens += count_tokens(s);
  out.stats.excluded_triples = kb.report.excluded + kb.report.unknown_relation;
  return out;
}

// ---------------------------------------------------------------------------
// Biographies

namespace {

const std::vector<std::string> kFirstNames = {
    "Alice", "Bernard", "Clara", "Dmitri", "Elena", "Farid", "Greta", "Hugo", "Ingrid", "Jonas", "Keiko", "Lorenzo",
    "Marta", "Nikolai", "Olivia", "Pavel", "Quentin", "Rosa", "Samuel", "Tamara", "Ulrich", "Vera", "Walter",
    "Ximena", "Yusuf", "Zelda", "Anton", "Beatrix", "Cyrus", "Dalia"};
const std::vector<std::string> kLastNames = {
    "Abbott", "Brennan", "Castillo", "Dawson", "Eriksen", "Fischer", "Garner", "Hoffman", "Iverson", "Jensen",
    "Kowalski", "Lindqvist", "Moreau", "Novak", "Okafor", "Petrov", "Quinn", "Rasmussen", "Sandoval", "Tanaka",
    "Underwood", "Valdez", "Whitaker", "Yamamoto", "Zimmerman"};
const std::vector<std::string> kCities = {"Boston", "Denver", "Lisbon", "Madrid", "Oslo", "Prague", "Seattle",
                                          "Toronto", "Vienna", "Zurich", "Dublin", "Kyoto", "Lyon", "Munich",
                                          "Porto", "Quebec"};
const std::vector<std::string> kEmployers = {"Meta Platforms", "Northwind Traders", "Acme Corporation",
                                             "Globex Industries", "Initech", "Umbrella Logistics",
                                             "Stark Engineering", "Wayne Holdings", "Cyberdyne Labs",
                                             "Hooli Networks", "Vandelay Imports", "Soylent Foods"};
const std::vector<std::string> kFields = {"Chemistry", "Economics", "History", "Linguistics", "Mathematics",
                                          "Medicine", "Physics", "Psychology", "Sociology", "Architecture",
                                          "Astronomy", "Geology"};
const std::vector<std::string> kUniversities = {"Harvard University", "Stanford University", "Oxford University",
                                                "Kyoto University", "Sorbonne University", "Yale University",
                                                "Princeton University", "Columbia University"};
const std::vector<std::string> kMonths = {"January", "February", "March",     "April",   "May",      "June",
                                          "July",    "August",   "September", "October", "November", "December"};

const std::vector<std::string> kBirthForms = {"{name} was born on {month} {day} , {year} .",
                                              "{name} came into this world on {month} {day} , {year} .",
                                              "{name} celebrates a birthday on {month} {day} , {year} ."};
const std::vector<std::string> kCityForms = {"{name} spent early years in {city} .",
                                             "{name} grew up in {city} .", "{name} was raised in {city} ."};
const std::vector<std::string> kSchoolForms = {"{name} studied {field} at {university} .",
                                               "{name} received a degree in {field} from {university} .",
                                               "{name} focused on {field} during studies at {university} ."};
const std::vector<std::string> kWorkForms = {"{name} worked for {employer} .", "{name} was employed at {employer} .",
                                             "{name} held a job at {employer} ."};

std::string fill(std::string form, const std::map<std::string, std::string>& vars) {
  for (const auto& [key, value] : vars) {
    const std::string marker = "{" + key + "}";
    std::size_t pos;
    while ((pos = form.find(marker)) != std::string::npos) form.replace(pos, marker.size(), value);
  }
  return form;
}

}  // namespace

std::set<std::string> bio_lexicon() {
  std::set<std::string> words;
  for (const auto* list : {&kFirstNames, &kLastNames, &kCities, &kEmployers, &kFields, &kUniversities, &kMonths,
                           &kBirthForms, &kCityForms, &kSchoolForms, &kWorkForms}) {
    for (const auto& s : *list) add_lower_words(s, words);
  }
  return words;
}

std::vector<std::string> generate_bio_corpus(int n_people, std::uint64_t seed) {
  require(n_people >= 1, "generate_bio_corpus requires n_people >= 1");
  std::mt19937_64 rng(mix_seed(seed, 0x62696f));
  auto pick = [&rng](const std::vector<std::string>& v) -> const std::string& {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n_people) * 4);
  for (int p = 0; p < n_people; ++p) {
    std::map<std::string, std::string> vars;
    vars["name"] = pick(kFirstNames) + " " + pick(kLastNames);
    vars["month"] = pick(kMonths);
    vars["day"] = std::to_string(std::uniform_int_distribution<int>(1, 28)(rng));
    vars["year"] = std::to_string(std::uniform_int_distribution<int>(1900, 2005)(rng));
    vars["city"] = pick(kCities);
    vars["field"] = pick(kFields);
    vars["university"] = pick(kUniversities);
    vars["employer"] = pick(kEmployers);
    for (const auto* forms : {&kBirthForms, &kCityForms, &kSchoolForms, &kWorkForms}) {
      out.push_back(fill(pick(*forms), vars));
    }
  }
  return out;
}

}  // namespace cc
