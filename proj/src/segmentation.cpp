#include "live/segmentation.hpp"

#include "live/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>

namespace live {

namespace {

constexpr std::array<std::string_view, 8> kAbbreviations = {"mr", "mrs", "dr", "st",
                                                             "vs", "etc", "e.g", "i.e"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_abbreviation(std::string_view word) {
  const std::string w = lower(word);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), w) != kAbbreviations.end();
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

void push_unit(SegmentedDocument& doc, std::size_t begin, std::size_t end) {
  const std::string_view raw(doc.raw_text);
  while (begin < end && is_space(raw[begin])) ++begin;
  while (end > begin && is_space(raw[end - 1])) --end;
  if (begin == end) return;
  doc.units.push_back({std::string(raw.substr(begin, end - begin)), {begin, end}, {}});
}

void segment_prose(SegmentedDocument& doc) {
  const std::string& s = doc.raw_text;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_terminal(s[i])) {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < s.size() && is_terminal(s[run_end])) ++run_end;
    // Abbreviation check applies when the run is a single '.'.
    bool abbreviation = false;
    if (run_end - i == 1 && s[i] == '.') {
      std::size_t w = i;
      while (w > start && !is_space(s[w - 1])) --w;
      abbreviation = is_abbreviation(std::string_view(s).substr(w, i - w));
    }
    std::size_t next = run_end;
    while (next < s.size() && is_space(s[next])) ++next;
    const bool boundary = !abbreviation && next > run_end && next < s.size() &&
                          (std::isupper(static_cast<unsigned char>(s[next])) ||
                           std::isdigit(static_cast<unsigned char>(s[next])));
    if (boundary) {
      push_unit(doc, start, run_end);
      start = next;
    }
    i = run_end;
  }
  push_unit(doc, start, s.size());
}

void segment_mr(SegmentedDocument& doc) {
  const std::string& s = doc.raw_text;
  int depth = 0;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    const auto before = doc.units.size();
    push_unit(doc, start, end);
    if (doc.units.size() == before) throw Error(ErrorCode::MalformedMR, "empty key[value] group");
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '[') {
      ++depth;
    } else if (s[i] == ']') {
      if (--depth < 0) throw Error(ErrorCode::MalformedMR, "unbalanced ']' at offset " + std::to_string(i));
    } else if (s[i] == ',' && depth == 0) {
      flush(i);
      start = i + 1;
    }
  }
  if (depth != 0) throw Error(ErrorCode::MalformedMR, "unclosed '['");
  flush(s.size());
}

}  // namespace

SegmentedDocument segment_text(std::string_view text, SegmentMode mode) {
  if (trim(text).empty()) throw Error(ErrorCode::EmptyInput, "text is empty after trimming");
  SegmentedDocument doc;
  doc.raw_text = std::string(text);
  doc.mode = mode;
  if (mode == SegmentMode::prose) {
    segment_prose(doc);
  } else {
    segment_mr(doc);
  }
  return doc;
}

std::vector<std::string> word_pieces(std::string_view text) {
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
    } else if (u < 128 && std::ispunct(u)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  flush();
  return out;
}

Vocab::Vocab() {
  for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>", "<mask>"}) {
    index_.emplace(t, static_cast<TokenId>(tokens_.size()));
    tokens_.emplace_back(t);
  }
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) return tokens_[kUnk];
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

Vocab Vocab::from_tokens(const std::vector<std::string>& non_reserved) {
  Vocab v;
  for (const auto& t : non_reserved) {
    if (v.index_.count(t)) throw Error(ErrorCode::InvalidArgument, "duplicate vocab token '" + t + "'");
    v.index_.emplace(t, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(t);
  }
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write vocab " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read vocab " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.size() < static_cast<std::size_t>(kReservedCount))
    throw Error(ErrorCode::CorruptFile, "vocab file lacks reserved tokens");
  const Vocab reserved;
  for (int i = 0; i < kReservedCount; ++i) {
    if (lines[static_cast<std::size_t>(i)] != reserved.tokens_[static_cast<std::size_t>(i)])
      throw Error(ErrorCode::CorruptFile, "vocab reserved token mismatch at id " + std::to_string(i));
  }
  return from_tokens({lines.begin() + kReservedCount, lines.end()});
}

Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t max_size) {
  if (corpus.empty()) throw Error(ErrorCode::InvalidArgument, "build_vocab: corpus is empty");
  if (max_size <= static_cast<std::size_t>(kReservedCount))
    throw Error(ErrorCode::InvalidArgument, "build_vocab: max_size must exceed the reserved ids");
  std::map<std::string, std::size_t> freq;
  const Vocab reserved;
  for (const auto& line : corpus)
    for (auto& piece : word_pieces(line))
      if (!reserved.contains(piece)) ++freq[piece];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> keep;
  for (const auto& [tok, n] : ranked) {
    if (keep.size() + kReservedCount >= max_size) break;
    keep.push_back(tok);
  }
  return Vocab::from_tokens(keep);
}

TokenizedDocument tokenize(SegmentedDocument& doc, const Vocab& vocab) {
  TokenizedDocument out;
  out.ids.push_back(kBos);
  out.pieces.emplace_back();
  out.unit_of.push_back(-1);
  for (std::size_t u = 0; u < doc.units.size(); ++u) {
    auto& unit = doc.units[u];
    unit.token_span.begin = out.ids.size();
    for (auto& piece : word_pieces(unit.text)) {
      out.ids.push_back(vocab.id(piece));
      out.pieces.push_back(std::move(piece));
      out.unit_of.push_back(static_cast<int>(u));
    }
    unit.token_span.end = out.ids.size();
  }
  out.ids.push_back(kEos);
  out.pieces.emplace_back();
  out.unit_of.push_back(-1);
  return out;
}

std::vector<TokenId> encode(std::string_view text, const Vocab& vocab) {
  std::vector<TokenId> ids{kBos};
  for (const auto& piece : word_pieces(text)) ids.push_back(vocab.id(piece));
  ids.push_back(kEos);
  return ids;
}

std::string decode(const std::vector<TokenId>& ids, const Vocab& vocab) {
  std::string out;
  for (TokenId id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

}  // namespace live
