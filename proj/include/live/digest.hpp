#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace live {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> bytes);
Digest sha256(std::string_view text);

// Trim, collapse internal whitespace runs to one space, lowercase.
std::string normalize_sentence(std::string_view sentence);

// SHA-256 of the normalized sentence; the cache key and mock-backend seed.
Digest sentence_key(std::string_view sentence);

std::string to_hex(const Digest& d);

// Stage seeds come from the master seed by hashing "label:master".
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace live
