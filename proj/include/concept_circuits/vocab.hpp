#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "concept_circuits/text.hpp"

namespace cc {

/// Word-level vocabulary. Ids 0..2 are the special tokens; the rest are ordered by
/// descending corpus frequency, ties broken lexicographically.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kSpecials = 3;

  static Vocabulary build(const std::vector<std::string>& corpus);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Tokenizes and maps to ids; unknown words map to kUnk. No BOS is added.
  std::vector<int> encode(std::string_view text) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace cc
