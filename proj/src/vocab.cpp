#include "concept_circuits/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "concept_circuits/common.hpp"

namespace cc {

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (std::ispunct(u)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus) {
  std::map<std::string, long long> freq;
  for (const auto& text : corpus) {
    for (auto& w : tokenize_words(text)) ++freq[std::move(w)];
  }
  std::vector<std::pair<std::string, long long>> entries(freq.begin(), freq.end());
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens = {"<pad>", "<bos>", "<unk>"};
  for (auto& e : entries) {
    if (e.first == "<pad>" || e.first == "<bos>" || e.first == "<unk>") continue;
    tokens.push_back(std::move(e.first));
  }
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  require(tokens.size() >= kSpecials, "vocabulary must contain the special tokens");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
      throw InvalidArgument("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : tokenize_words(text)) ids.push_back(id(w));
  return ids;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return from_tokens(std::move(tokens));
}

}  // namespace cc
