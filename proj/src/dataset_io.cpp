#include <fstream>

#include "concept_circuits/common.hpp"
#include "concept_circuits/concept_kb.hpp"
#include "json.hpp"

namespace cc {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  return in;
}

Category category_from_json(const json& j) {
  auto c = parse_category(j.get<std::string>());
  if (!c) throw InvalidArgument("unknown category '" + j.get<std::string>() + "'");
  return *c;
}

}  // namespace

void write_samples_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  auto out = open_out(path);
  for (const auto& s : samples) {
    json j;
    j["triple_id"] = s.triple_id;
    j["template_id"] = s.template_id;
    j["concept_id"] = s.concept_id;
    j["prefix"] = s.prefix;
    j["target"] = s.target;
    j["split"] = s.split == Split::Train ? "train" : "test";
    j["category"] = std::string(category_name(s.category));
    out << j.dump() << '\n';
  }
}

std::vector<Sample> read_samples_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Sample s;
      s.triple_id = j.at("triple_id").get<int>();
      s.template_id = j.at("template_id").get<int>();
      s.concept_id = j.at("concept_id").get<int>();
      s.prefix = j.at("prefix").get<std::string>();
      s.target = j.at("target").get<std::string>();
      s.split = j.at("split").get<std::string>() == "test" ? Split::Test : Split::Train;
      s.category = category_from_json(j.at("category"));
      samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

void write_kb_json(const std::filesystem::path& path, const KnowledgeBase& kb) {
  json j;
  j["concepts"] = json::array();
  for (const auto& c : kb.concepts) {
    json jc;
    jc["id"] = c.id;
    jc["real_name"] = c.real_name;
    jc["fictional_name"] = c.fictional_name;
    jc["split"] = c.split == ConceptSplit::TrainAndTest ? "train_and_test" : "train_only";
    if (c.concreteness) jc["concreteness"] = *c.concreteness == Concreteness::Concrete ? "concrete" : "abstract";
    j["concepts"].push_back(std::move(jc));
  }
  j["triples"] = json::array();
  for (const auto& t : kb.triples) {
    j["triples"].push_back({{"id", t.id},
                            {"subject", t.subject},
                            {"relation", t.relation},
                            {"object", t.object},
                            {"category", std::string(category_name(t.category))}});
  }
  auto out = open_out(path);
  out << j.dump(1) << '\n';
}

KnowledgeBase read_kb_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
  KnowledgeBase kb;
  for (const auto& jc : j.at("concepts")) {
    Concept c;
    c.id = jc.at("id").get<int>();
    c.real_name = jc.at("real_name").get<std::string>();
    c.fictional_name = jc.at("fictional_name").get<std::string>();
    c.split = jc.at("split").get<std::string>() == "train_and_test" ? ConceptSplit::TrainAndTest
                                                                      : ConceptSplit::TrainOnly;
    if (jc.contains("concreteness")) {
      c.concreteness =
          jc.at("concreteness").get<std::string>() == "abstract" ? Concreteness::Abstract : Concreteness::Concrete;
    }
    kb.concepts.push_back(std::move(c));
  }
  for (const auto& jt : j.at("triples")) {
    KnowledgeTriple t;
    t.id = jt.at("id").get<int>();
    t.subject = jt.at("subject").get<int>();
    t.relation = jt.at("relation").get<std::string>();
    t.object = jt.at("object").get<std::string>();
    t.category = category_from_json(jt.at("category"));
    kb.triples.push_back(std::move(t));
  }
  kb.report.retained = kb.triples.size();
  return kb;
}

void write_templates_json(const std::filesystem::path& path, const TemplatePools& pools) {
  json j = json::array();
  for (const auto& t : pools.templates) {
    j.push_back({{"id", t.id},
                 {"relation", t.relation},
                 {"pattern", t.pattern},
                 {"pool", t.pool == Pool::Train ? "train" : "test"}});
  }
  auto out = open_out(path);
  out << j.dump(1) << '\n';
}

void write_stats_json(const std::filesystem::path& path, const DatasetStats& s, const IngestReport& report) {
  json j;
  j["train"] = {{"concepts", s.train_concepts},
                {"knowledges", s.train_triples},
                {"samples", s.train_samples},
                {"tokens", s.train_tokens}};
  j["test"] = {{"concepts", s.test_concepts},
               {"knowledges", s.test_triples},
               {"samples", s.test_samples},
               {"tokens", s.test_tokens}};
  j["ingest"] = {{"lines", report.lines},
                 {"comments", report.comments},
                 {"retained", report.retained},
                 {"excluded", report.excluded},
                 {"unknown_relation", report.unknown_relation},
                 {"duplicates", report.duplicates},
                 {"beyond_concept_limit", report.beyond_concept_limit}};
  auto out = open_out(path);
  out << j.dump(1) << '\n';
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  auto out = open_out(path);
  for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace cc
