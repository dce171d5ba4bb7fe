#pragma once

#include "oosenc/encodings.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace oosenc {

// Lowercased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

// Signed hashed bag-of-words, L2-normalised. Empty text (no tokens) gives
// the zero vector. dim must be >= 8.
Vector hash_featurize(std::string_view text, std::size_t dim);

}  // namespace oosenc
