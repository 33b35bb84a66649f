#pragma once

#include "live/types.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace live {

enum class SegmentMode { prose, e2e_mr };

// Half-open [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

struct SentenceUnit {
  std::string text;
  Span char_span;
  Span token_span;  // filled by tokenize()
};

struct SegmentedDocument {
  std::string raw_text;
  std::vector<SentenceUnit> units;
  SegmentMode mode = SegmentMode::prose;
};

// Splits text into synthesis units. Prose mode breaks after runs of '.', '!'
// or '?' that are followed by whitespace and an uppercase letter or digit,
// unless the word ending in '.' is a known abbreviation. E2E mode splits
// key[value] groups on top-level commas.
SegmentedDocument segment_text(std::string_view text, SegmentMode mode);

// Lowercased word pieces: whitespace separates words and every ASCII
// punctuation character is a piece of its own.
std::vector<std::string> word_pieces(std::string_view text);

class Vocab {
 public:
  Vocab();

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line, reserved tokens included, in id order.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  // Builds from an explicit non-reserved token list, in the order given.
  static Vocab from_tokens(const std::vector<std::string>& non_reserved);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Ranks pieces by frequency (descending) then lexicographically; reserved ids
// come first and the result never exceeds max_size entries.
Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t max_size);

struct TokenizedDocument {
  std::vector<TokenId> ids;         // <bos> ... <eos>
  std::vector<std::string> pieces;  // surface piece per position ("" for specials)
  std::vector<int> unit_of;         // unit index per position, -1 for specials
};

// Fills each unit's token_span in doc.
TokenizedDocument tokenize(SegmentedDocument& doc, const Vocab& vocab);

// Encodes plain text (no segmentation) as <bos> pieces <eos>.
std::vector<TokenId> encode(std::string_view text, const Vocab& vocab);

// Joins ids back to text, dropping special tokens.
std::string decode(const std::vector<TokenId>& ids, const Vocab& vocab);

}  // namespace live
