#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>

#include "concept_circuits/common.hpp"
#include "concept_circuits/concept_kb.hpp"

namespace cc {

namespace {

// Relation phrasings; each ends where the object phrase begins.
const std::map<std::string, std::vector<std::string>>& core_phrases() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"IsA",
       {"{concept} is a kind of", "{concept} is a type of", "{concept} is a sort of",
        "{concept} belongs to the category of", "{concept} is classified as", "{concept} is an example of"}},
      {"DefinedAs",
       {"{concept} is defined as", "{concept} can be defined as", "{concept} is best described as",
        "the definition of {concept} is", "the word {concept} means", "{concept} refers to"}},
      {"FormOf",
       {"{concept} is a form of the word", "{concept} is a variant of", "{concept} is an inflected form of",
        "{concept} takes its form from", "{concept} is a grammatical form of", "{concept} is a word form of"}},
      {"InstanceOf",
       {"{concept} is an instance of", "{concept} is one particular", "{concept} is a specific",
        "{concept} is a single case of", "{concept} is a concrete instance of", "{concept} counts as an instance of"}},
      {"Synonym",
       {"{concept} is a synonym of", "{concept} means the same as", "another word for {concept} is",
        "{concept} is equivalent in meaning to", "{concept} can also be called", "{concept} is synonymous with"}},
      {"SimilarTo",
       {"{concept} is similar to", "{concept} resembles", "{concept} is much like", "{concept} is comparable to",
        "{concept} looks a lot like", "{concept} is akin to"}},
      {"Antonym",
       {"{concept} is the opposite of", "the antonym of {concept} is", "{concept} contrasts sharply with",
        "{concept} is the reverse of", "{concept} stands opposite to", "the contrary of {concept} is"}},
      {"DistinctFrom",
       {"{concept} is distinct from", "{concept} is not the same as", "{concept} differs from",
        "{concept} should not be confused with", "{concept} is different from", "{concept} is separate from"}},
      {"PartOf",
       {"{concept} is part of", "{concept} is a component of", "{concept} is a piece of",
        "{concept} can be found as a piece of", "{concept} forms part of", "{concept} is one element of"}},
      {"HasA",
       {"{concept} has", "{concept} comes with", "{concept} possesses", "{concept} is equipped with",
        "{concept} contains", "{concept} features"}},
      {"MadeOf",
       {"{concept} is made of", "{concept} is composed of", "{concept} is built from", "{concept} consists of",
        "{concept} is crafted from", "{concept} is produced from"}},
      {"HasProperty",
       {"{concept} is", "{concept} tends to be", "{concept} is usually", "{concept} is known to be",
        "{concept} is often", "{concept} can be described as"}},
      {"UsedFor",
       {"{concept} is used for", "{concept} is useful for", "people use {concept} for",
        "{concept} serves the purpose of", "{concept} is meant for", "{concept} helps with"}},
      {"CapableOf",
       {"{concept} has the ability to", "{concept} can", "{concept} is able to", "{concept} knows how to",
        "{concept} is known to", "{concept} has the capacity to"}},
      {"ReceivesAction",
       {"{concept} can be", "{concept} is often", "{concept} is typically", "{concept} may be",
        "{concept} is commonly", "{concept} is sometimes"}},
      {"AtLocation",
       {"{concept} is located at", "you can find {concept} at", "{concept} is typically found in",
        "{concept} is found in", "{concept} can be seen in", "{concept} usually sits in"}},
      {"LocatedNear",
       {"{concept} is located near", "{concept} is close to", "{concept} sits next to",
        "{concept} can be found near", "{concept} is adjacent to", "{concept} lies beside"}},
  };
  return table;
}

const std::vector<std::string> kFramings = {"",
                                            "in general,",
                                            "as everyone knows,",
                                            "it is said that",
                                            "people say that",
                                            "by all accounts,",
                                            "according to the records,",
                                            "note that",
                                            "indeed,",
                                            "it is well known that"};

std::string capitalize_first(std::string s) {
  if (!s.empty() && s.front() != '{') s.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(s.front())));
  return s;
}

std::size_t count_slots(const std::string& pattern) {
  std::size_t n = 0;
  for (std::size_t pos = pattern.find(kSlot); pos != std::string::npos; pos = pattern.find(kSlot, pos + 1)) ++n;
  return n;
}

}  // namespace

std::vector<std::string> builtin_template_bank(std::string_view relation) {
  const auto& table = core_phrases();
  auto it = table.find(std::string(relation));
  if (it == table.end()) throw InvalidArgument("no built-in templates for relation '" + std::string(relation) + "'");
  std::vector<std::string> bank;
  for (const auto& framing : kFramings) {
    for (const auto& core : it->second) {
      bank.push_back(capitalize_first(normalize_whitespace(framing + " " + core)));
    }
  }
  return bank;
}

TemplatePools build_template_pools(const std::vector<std::string>& relations, int per_relation, double test_fraction,
                                   std::uint64_t seed) {
  TemplateBank bank;
  for (const auto& r : relations) bank[r] = builtin_template_bank(r);
  return build_template_pools(bank, per_relation, test_fraction, seed);
}

TemplatePools build_template_pools(const TemplateBank& bank, int per_relation, double test_fraction,
                                   std::uint64_t seed) {
  require(per_relation >= 2, "per_relation must be at least 2");
  require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must lie strictly between 0 and 1");
  // The small slack keeps e.g. 50 * 0.8 at 40 despite binary rounding.
  const int n_train = static_cast<int>(std::ceil(per_relation * (1.0 - test_fraction) - 1e-9));
  const int n_test = per_relation - n_train;
  if (n_train < 1 || n_test < 1) {
    throw InvalidArgument("per_relation=" + std::to_string(per_relation) + " with test_fraction=" +
                          std::to_string(test_fraction) + " leaves an empty train or test pool");
  }

  TemplatePools pools;
  std::uint64_t stream = 0;
  for (const auto& [relation, patterns] : bank) {
    ++stream;
    std::vector<std::string> unique;
    std::set<std::string> seen;
    for (const auto& raw : patterns) {
      std::string p = normalize_whitespace(raw);
      if (count_slots(p) != 1) {
        throw InvalidArgument("template for relation '" + relation + "' must contain exactly one " +
                              std::string(kSlot) + " slot: \"" + p + "\"");
      }
      if (seen.insert(p).second) unique.push_back(std::move(p));
    }
    if (static_cast<int>(unique.size()) < per_relation) {
      throw InvalidArgument("relation '" + relation + "' has " + std::to_string(unique.size()) +
                            " distinct templates, fewer than per_relation=" + std::to_string(per_relation));
    }
    std::mt19937_64 rng(mix_seed(seed, stream));
    std::shuffle(unique.begin(), unique.end(), rng);
    for (int i = 0; i < per_relation; ++i) {
      Template t;
      t.id = static_cast<int>(pools.templates.size());
      t.relation = relation;
      t.pattern = unique[static_cast<std::size_t>(i)];
      t.pool = i < n_train ? Pool::Train : Pool::Test;
      (t.pool == Pool::Train ? pools.train_by_relation : pools.test_by_relation)[relation].push_back(t.id);
      pools.templates.push_back(std::move(t));
    }
  }
  return pools;
}

}  // namespace cc
