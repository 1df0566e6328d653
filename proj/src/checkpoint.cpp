#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "concept_circuits/common.hpp"
#include "concept_circuits/train.hpp"

namespace cc {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw InvalidArgument("truncated checkpoint: " + path.string());
  return v;
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  auto s = path;
  s += ".json";
  return s;
}

}  // namespace

void save_parameters(const std::filesystem::path& path, const Parameters& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  const ModelConfig& c = params.config();
  for (int v : {c.n_layers, c.n_heads, c.d_model, c.d_mlp, c.context_len, c.vocab_size}) put<std::int32_t>(os, v);
  put<std::uint64_t>(os, params.size());
  const auto vals = params.values();
  os.write(reinterpret_cast<const char*>(vals.data()), static_cast<std::streamsize>(vals.size() * sizeof(double)));
  if (!os) throw Error("failed writing " + path.string());
}

Parameters load_parameters(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw InvalidArgument("not a checkpoint file (bad magic): " + path.string());
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw InvalidArgument("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  }
  ModelConfig c;
  c.n_layers = get<std::int32_t>(is, path);
  c.n_heads = get<std::int32_t>(is, path);
  c.d_model = get<std::int32_t>(is, path);
  c.d_mlp = get<std::int32_t>(is, path);
  c.context_len = get<std::int32_t>(is, path);
  c.vocab_size = get<std::int32_t>(is, path);
  if (const auto v = c.violations(); !v.empty()) throw InvalidArgument("checkpoint " + path.string() + ": " + v.front());
  Parameters p(c);
  const auto count = get<std::uint64_t>(is, path);
  if (count != p.size()) {
    throw InvalidArgument("checkpoint " + path.string() + ": parameter count " + std::to_string(count) +
                          " does not match the architecture (" + std::to_string(p.size()) + ")");
  }
  auto vals = p.values();
  if (!is.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(vals.size() * sizeof(double)))) {
    throw InvalidArgument("truncated checkpoint: " + path.string());
  }
  if (is.peek() != std::char_traits<char>::eof()) throw InvalidArgument("trailing bytes in checkpoint " + path.string());
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  require(ckpt.params != nullptr, "save_checkpoint: checkpoint has no parameters");
  save_parameters(path, *ckpt.params);
  nlohmann::json meta = {{"stage", stage_name(ckpt.stage)}, {"step", ckpt.step}, {"loss", ckpt.loss}};
  std::ofstream os(sidecar(path));
  if (!os) throw Error("cannot write " + sidecar(path).string());
  os << meta.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Checkpoint c;
  c.params = std::make_shared<const Parameters>(load_parameters(path));
  const auto meta_path = sidecar(path);
  if (std::filesystem::exists(meta_path)) {
    std::ifstream is(meta_path);
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(is);
      c.stage = parse_stage(meta.at("stage").get<std::string>());
      c.step = meta.at("step").get<int>();
      c.loss = meta.at("loss").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("bad checkpoint metadata " + meta_path.string() + ": " + e.what());
    }
  }
  return c;
}

}  // namespace cc
