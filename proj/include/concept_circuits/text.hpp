#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cc {

/// Word-level tokenizer shared by the dataset statistics and the model vocabulary:
/// splits on whitespace and emits every ASCII punctuation character as its own token.
std::vector<std::string> tokenize_words(std::string_view text);

}  // namespace cc
