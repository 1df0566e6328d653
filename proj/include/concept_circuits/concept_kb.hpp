#pragma once

// Knowledge-base ingestion, fictional renaming, template pools and dataset rendering.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace cc {

enum class Category { HAH, SAA, MAH, PAA, SR, Excluded };

inline constexpr std::array<Category, 5> kRetainedCategories = {Category::HAH, Category::SAA, Category::MAH,
                                                                Category::PAA, Category::SR};

std::string_view category_name(Category c);
std::optional<Category> parse_category(std::string_view name);

/// Total mapping from a fine-grained relation name to its knowledge category.
/// Relations in the excluded families and unknown relations both map to Excluded.
/// A leading "/r/" (ConceptNet URI form) is ignored.
Category map_relation_category(std::string_view relation);

/// True when the relation appears in the mapping table (retained or explicitly excluded).
bool is_known_relation(std::string_view relation);

/// The retained relation names in table order.
const std::vector<std::string>& retained_relations();

enum class Concreteness { Concrete, Abstract };
enum class ConceptSplit { TrainOnly, TrainAndTest };

struct Concept {
  int id = 0;
  std::string real_name;
  std::string fictional_name;
  std::optional<Concreteness> concreteness;
  ConceptSplit split = ConceptSplit::TrainOnly;
};

struct KnowledgeTriple {
  int id = 0;
  int subject = 0;  // index into KnowledgeBase::concepts
  std::string relation;
  std::string object;
  Category category = Category::Excluded;
};

struct IngestReport {
  std::size_t lines = 0;
  std::size_t comments = 0;
  std::size_t retained = 0;
  std::size_t excluded = 0;
  std::size_t unknown_relation = 0;
  std::size_t duplicates = 0;
  std::size_t beyond_concept_limit = 0;
  std::vector<std::string> warnings;
};

struct KnowledgeBase {
  std::vector<Concept> concepts;
  std::vector<KnowledgeTriple> triples;
  IngestReport report;

  /// Triple indices grouped by subject concept.
  std::vector<std::vector<int>> triples_by_concept() const;
};

enum class UnknownRelationPolicy { DropWithWarning, Error };

struct IngestOptions {
  UnknownRelationPolicy unknown_relation = UnknownRelationPolicy::DropWithWarning;
  /// Keep only the first N distinct subjects (in file order); 0 keeps all.
  std::size_t max_concepts = 0;
};

/// Parses the tab-separated triple format: `subject<TAB>relation<TAB>object[<TAB>concrete|abstract]`.
/// Blank lines and lines starting with '#' are skipped; exact duplicate triples collapse.
KnowledgeBase parse_knowledge_graph(std::istream& in, const IngestOptions& options = {});
KnowledgeBase load_knowledge_graph(const std::filesystem::path& path, const IngestOptions& options = {});

// ---------------------------------------------------------------------------
// Fictional names

struct NameInventory {
  std::vector<std::string> onsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                     "br", "dr", "gl", "kr", "pl", "st", "tr", "th", "sh", "qu"};
  std::vector<std::string> vowels = {"a", "e", "i", "o", "u", "ai", "ea", "ou"};
  std::vector<std::string> codas = {"", "", "n", "l", "r", "x", "th"};
  int min_syllables = 2;
  int max_syllables = 4;

  /// Number of distinct words the composer can emit (saturating).
  std::uint64_t capacity() const;
};

struct NamingOptions {
  NameInventory inventory;
  /// Extra words a fictional name must not equal (template and corpus vocabulary).
  std::set<std::string> reserved;
};

/// Words that generated names must avoid: every template-bank word and the biography lexicon.
std::set<std::string> default_reserved_words();

/// Returns a copy of `kb` with every concept renamed. Deterministic in (kb, seed, options).
/// Object phrases have every occurrence of a renamed concept rewritten to its fictional name.
KnowledgeBase assign_fictional_names(KnowledgeBase kb, std::uint64_t seed, const NamingOptions& options = {});

// ---------------------------------------------------------------------------
// Templates

inline constexpr std::string_view kSlot = "{concept}";

enum class Pool { Train, Test };

struct Template {
  int id = 0;
  std::string relation;
  std::string pattern;
  Pool pool = Pool::Train;
};

struct TemplatePools {
  std::vector<Template> templates;
  std::map<std::string, std::vector<int>> train_by_relation;  // indices into templates
  std::map<std::string, std::vector<int>> test_by_relation;

  const Template& at(int id) const { return templates.at(static_cast<std::size_t>(id)); }
};

/// Built-in pattern bank for a retained relation (at least 50 distinct patterns).
std::vector<std::string> builtin_template_bank(std::string_view relation);

using TemplateBank = std::map<std::string, std::vector<std::string>>;

TemplatePools build_template_pools(const std::vector<std::string>& relations, int per_relation, double test_fraction,
                                   std::uint64_t seed);
TemplatePools build_template_pools(const TemplateBank& bank, int per_relation, double test_fraction,
                                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Samples

enum class Split { Train, Test };

struct Sample {
  int triple_id = 0;
  int template_id = 0;
  int concept_id = 0;
  std::string prefix;
  std::string target;
  Split split = Split::Train;
  Category category = Category::Excluded;
};

std::string normalize_whitespace(std::string_view text);

Sample render_sample(const KnowledgeTriple& triple, const Concept& subject, const Template& tmpl,
                     Split split = Split::Train);

struct DatasetStats {
  std::size_t train_concepts = 0;
  std::size_t test_concepts = 0;
  std::size_t train_triples = 0;
  std::size_t test_triples = 0;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  std::size_t train_tokens = 0;
  std::size_t test_tokens = 0;
  std::size_t excluded_triples = 0;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::vector<int> test_concepts;  // ascending concept ids
  DatasetStats stats;
};

/// Deterministic choice of `count` concept ids (ascending).
std::vector<int> choose_test_concepts(const KnowledgeBase& kb, int count, std::uint64_t seed);

/// Returns a copy of `kb` with the chosen concepts marked TrainAndTest.
KnowledgeBase mark_test_split(KnowledgeBase kb, const std::vector<int>& test_concepts);

DatasetSplit generate_dataset(const KnowledgeBase& kb, const TemplatePools& pools, int resamples_per_triple,
                              int test_concept_count, std::uint64_t seed);

/// Templated synthetic biographies (name, birth date, city, school, employer): four
/// sentences per person, one sentence per element.
std::vector<std::string> generate_bio_corpus(int n_people, std::uint64_t seed);

/// Words used by the biography generator (lower-cased), for name reservation.
std::set<std::string> bio_lexicon();

// ---------------------------------------------------------------------------
// Persistence (dataset directory)

struct DatasetFiles {
  static constexpr const char* kTrain = "train.jsonl";
  static constexpr const char* kTest = "test.jsonl";
  static constexpr const char* kBio = "bio.txt";
  static constexpr const char* kKb = "kb.json";
  static constexpr const char* kTemplates = "templates.json";
  static constexpr const char* kStats = "stats.json";
  static constexpr const char* kVocab = "vocab.txt";
};

void write_samples_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::vector<Sample> read_samples_jsonl(const std::filesystem::path& path);
void write_kb_json(const std::filesystem::path& path, const KnowledgeBase& kb);
KnowledgeBase read_kb_json(const std::filesystem::path& path);
void write_templates_json(const std::filesystem::path& path, const TemplatePools& pools);
void write_stats_json(const std::filesystem::path& path, const DatasetStats& stats, const IngestReport& report);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic knowledge graph (bundled toy data and full-scale count checks)

struct SyntheticKgOptions {
  int concepts = 600;
  /// Exact number of retained triples; 0 draws 1..6 per concept.
  int retained_triples = 0;
  /// Extra triples with excluded relations (exercise the filter).
  int excluded_triples = 40;
  std::uint64_t seed = 7;
};

/// Writes a ConceptNet-style TSV: concepts grouped into semantic domains whose members share
/// hypernyms and draw properties, parts and locations from per-domain pools.
std::string synthesize_knowledge_graph(const SyntheticKgOptions& options);

}  // namespace cc
