#include <cmath>
#include <fstream>
#include <set>

#include "concept_circuits/common.hpp"
#include "concept_circuits/harness.hpp"

namespace cc {

using nlohmann::json;

ExperimentConfig::ExperimentConfig() {
  stage1.steps = 200;
  stage1.checkpoint_every = 0;
  stage1.seed = 41;
  stage2.steps = 200;
  stage2.checkpoint_every = 50;
  stage2.seed = 42;
}

namespace {

json train_to_json(const TrainConfig& t) {
  return {{"lr", t.lr},       {"batch_size", t.batch_size}, {"steps", t.steps}, {"checkpoint_every", t.checkpoint_every},
          {"seed", t.seed},   {"beta1", t.beta1},           {"beta2", t.beta2}, {"eps", t.eps},
          {"weight_decay", t.weight_decay}};
}

// Reads known keys into their targets and rejects anything else.
class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw InvalidArgument("config: '" + section_ + "' must be an object");
  }
  template <class T>
  Reader& get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return *this;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument("config: '" + qualified(key) + "' has the wrong type");
    }
    return *this;
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw InvalidArgument("config: unknown key '" + qualified(k) + "'");
    }
  }

 private:
  std::string qualified(const std::string& key) const { return section_.empty() ? key : section_ + "." + key; }
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

void train_from_json(const json& j, const std::string& name, TrainConfig& t) {
  Reader r(j, name);
  r.get("lr", t.lr)
      .get("batch_size", t.batch_size)
      .get("steps", t.steps)
      .get("checkpoint_every", t.checkpoint_every)
      .get("seed", t.seed)
      .get("beta1", t.beta1)
      .get("beta2", t.beta2)
      .get("eps", t.eps)
      .get("weight_decay", t.weight_decay);
  r.finish();
}

void check_train(const TrainConfig& t, const std::string& name, std::vector<std::string>& v) {
  if (!(t.lr > 0.0) || !std::isfinite(t.lr)) v.push_back(name + ".lr must be a positive finite number");
  if (t.batch_size < 1) v.push_back(name + ".batch_size must be >= 1");
  if (t.steps < 0) v.push_back(name + ".steps must be >= 0");
  if (t.checkpoint_every < 0) v.push_back(name + ".checkpoint_every must be >= 0");
  if (!(t.beta1 >= 0.0 && t.beta1 < 1.0)) v.push_back(name + ".beta1 must be in [0, 1)");
  if (!(t.beta2 >= 0.0 && t.beta2 < 1.0)) v.push_back(name + ".beta2 must be in [0, 1)");
  if (!(t.eps > 0.0)) v.push_back(name + ".eps must be > 0");
  if (!(t.weight_decay >= 0.0)) v.push_back(name + ".weight_decay must be >= 0");
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  const auto& m = c.model.model;
  return {{"dataset",
           {{"kg", d.kg},
            {"synthetic_concepts", d.synthetic_concepts},
            {"synthetic_triples", d.synthetic_triples},
            {"max_concepts", d.max_concepts},
            {"resamples", d.resamples},
            {"per_relation", d.per_relation},
            {"test_fraction", d.test_fraction},
            {"test_concepts", d.test_concepts},
            {"bio_people", d.bio_people},
            {"seed", d.seed}}},
          {"model",
           {{"n_layers", m.n_layers},
            {"n_heads", m.n_heads},
            {"d_model", m.d_model},
            {"d_mlp", m.d_mlp},
            {"context_len", m.context_len},
            {"seed", c.model.seed}}},
          {"stage1", train_to_json(c.stage1)},
          {"stage2", train_to_json(c.stage2)},
          {"circuit",
           {{"threshold", c.circuit.threshold},
            {"m", c.circuit.m},
            {"max_concepts", c.circuit.max_concepts},
            {"seed", c.circuit.seed},
            {"heldout_seed", c.circuit.heldout_seed},
            {"linear_scan", c.circuit.linear_scan},
            {"raw_ratio", c.circuit.raw_ratio}}},
          {"analysis", {{"K", c.analysis.k}, {"seeds", c.analysis.seeds}, {"permutation_seed", c.analysis.permutation_seed}}},
          {"output_dir", c.output_dir}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Reader top(j, "");
  if (const json* d = top.child("dataset")) {
    Reader r(*d, "dataset");
    r.get("kg", c.dataset.kg)
        .get("synthetic_concepts", c.dataset.synthetic_concepts)
        .get("synthetic_triples", c.dataset.synthetic_triples)
        .get("max_concepts", c.dataset.max_concepts)
        .get("resamples", c.dataset.resamples)
        .get("per_relation", c.dataset.per_relation)
        .get("test_fraction", c.dataset.test_fraction)
        .get("test_concepts", c.dataset.test_concepts)
        .get("bio_people", c.dataset.bio_people)
        .get("seed", c.dataset.seed);
    r.finish();
  }
  if (const json* m = top.child("model")) {
    Reader r(*m, "model");
    r.get("n_layers", c.model.model.n_layers)
        .get("n_heads", c.model.model.n_heads)
        .get("d_model", c.model.model.d_model)
        .get("d_mlp", c.model.model.d_mlp)
        .get("context_len", c.model.model.context_len)
        .get("seed", c.model.seed);
    r.finish();
  }
  if (const json* s = top.child("stage1")) train_from_json(*s, "stage1", c.stage1);
  if (const json* s = top.child("stage2")) train_from_json(*s, "stage2", c.stage2);
  if (const json* ci = top.child("circuit")) {
    Reader r(*ci, "circuit");
    r.get("threshold", c.circuit.threshold)
        .get("m", c.circuit.m)
        .get("max_concepts", c.circuit.max_concepts)
        .get("seed", c.circuit.seed)
        .get("heldout_seed", c.circuit.heldout_seed)
        .get("linear_scan", c.circuit.linear_scan)
        .get("raw_ratio", c.circuit.raw_ratio);
    r.finish();
  }
  if (const json* a = top.child("analysis")) {
    Reader r(*a, "analysis");
    r.get("K", c.analysis.k).get("seeds", c.analysis.seeds).get("permutation_seed", c.analysis.permutation_seed);
    r.finish();
  }
  top.get("output_dir", c.output_dir);
  top.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << config_to_json(c).dump(2) << "\n";
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> v;
  const auto& d = c.dataset;
  if (d.kg.empty() && d.synthetic_concepts < 1) v.push_back("dataset.synthetic_concepts must be >= 1");
  if (d.synthetic_triples < 0) v.push_back("dataset.synthetic_triples must be >= 0");
  if (d.resamples < 1) v.push_back("dataset.resamples must be >= 1");
  if (d.per_relation < 2) v.push_back("dataset.per_relation must be >= 2");
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) v.push_back("dataset.test_fraction must be in (0, 1)");
  if (d.test_concepts < 0) v.push_back("dataset.test_concepts must be >= 0");
  if (d.bio_people < 1) v.push_back("dataset.bio_people must be >= 1");

  // Concept count known from the config alone (an external file may hold more).
  std::size_t concepts = 0;
  std::string concepts_field;
  if (d.max_concepts > 0) {
    concepts = d.max_concepts;
    concepts_field = "dataset.max_concepts";
  } else if (d.kg.empty()) {
    concepts = static_cast<std::size_t>(std::max(0, d.synthetic_concepts));
    concepts_field = "dataset.synthetic_concepts";
  }
  if (concepts > 0) {
    if (static_cast<std::size_t>(std::max(0, d.test_concepts)) > concepts) {
      v.push_back("dataset.test_concepts=" + std::to_string(d.test_concepts) + " exceeds " + concepts_field + "=" +
                  std::to_string(concepts));
    }
    const std::size_t need = 3 * static_cast<std::size_t>(std::max(0, c.analysis.k)) + 1;
    if (need > concepts) {
      v.push_back("analysis.K=" + std::to_string(c.analysis.k) + " needs at least " + std::to_string(need) +
                  " concepts but " + concepts_field + "=" + std::to_string(concepts));
    }
  }

  for (const auto& s : c.model.model.violations()) {
    if (s.find("vocab_size") == std::string::npos) v.push_back(s);  // vocab size comes from the data
  }
  check_train(c.stage1, "stage1", v);
  check_train(c.stage2, "stage2", v);
  if (!(c.circuit.threshold >= 0.0 && c.circuit.threshold <= 1.0)) {
    v.push_back("circuit.threshold must be a fraction in [0, 1]");
  }
  if (c.circuit.m < 1) v.push_back("circuit.m must be >= 1");
  if (c.circuit.max_concepts < 0) v.push_back("circuit.max_concepts must be >= 0");
  if (c.circuit.seed == c.circuit.heldout_seed) v.push_back("circuit.heldout_seed must differ from circuit.seed");
  if (c.analysis.k < 1) v.push_back("analysis.K must be >= 1");
  if (c.analysis.seeds.empty()) v.push_back("analysis.seeds must not be empty");
  if (c.output_dir.empty()) v.push_back("output_dir must not be empty");
  return v;
}

}  // namespace cc
