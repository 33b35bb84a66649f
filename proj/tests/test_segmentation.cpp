#include "live/error.hpp"
#include "live/segmentation.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace live;

namespace {

std::vector<std::string> unit_texts(const SegmentedDocument& d) {
  std::vector<std::string> out;
  for (const auto& u : d.units) out.push_back(u.text);
  return out;
}

// Joins unit texts with the original separators between their char spans.
std::string reconstruct(const SegmentedDocument& d) {
  std::string out = d.raw_text.substr(0, d.units.front().char_span.begin);
  for (std::size_t k = 0; k < d.units.size(); ++k) {
    out += d.units[k].text;
    const std::size_t sep_end = k + 1 < d.units.size() ? d.units[k + 1].char_span.begin : d.raw_text.size();
    out += d.raw_text.substr(d.units[k].char_span.end, sep_end - d.units[k].char_span.end);
  }
  return out;
}

}  // namespace

TEST(Segment, TwoSentences) {
  auto d = segment_text("Hello world. How are you?", SegmentMode::prose);
  EXPECT_EQ(unit_texts(d), (std::vector<std::string>{"Hello world.", "How are you?"}));
  EXPECT_EQ(d.units[0].char_span, (Span{0, 12}));
  EXPECT_EQ(d.units[1].char_span, (Span{13, 25}));
}

TEST(Segment, KeyValuePairs) {
  auto d = segment_text("name[Alameda], eatType[pub]", SegmentMode::e2e_mr);
  EXPECT_EQ(unit_texts(d), (std::vector<std::string>{"name[Alameda]", "eatType[pub]"}));
}

TEST(Segment, AbbreviationDoesNotSplit) {
  // "Dr" is on the abbreviation list, so the '.' before "Smith" is no boundary.
  auto d = segment_text("Dr. Smith left.", SegmentMode::prose);
  ASSERT_EQ(d.units.size(), 1u);
  EXPECT_EQ(d.units[0].text, "Dr. Smith left.");
}

TEST(Segment, AbbreviationListIsCaseInsensitive) {
  for (const char* text : {"Mr. Brown came.", "He met mrs. Gray.", "Go to St. Louis.", "Cats vs. Dogs.",
                           "Apples etc. Were sold.", "Fruit, e.g. Apples.", "One, i.e. The first."}) {
    EXPECT_EQ(segment_text(text, SegmentMode::prose).units.size(), 1u) << text;
  }
}

TEST(Segment, BoundaryNeedsUppercaseOrDigit) {
  EXPECT_EQ(segment_text("It rained. then it stopped.", SegmentMode::prose).units.size(), 1u);
  EXPECT_EQ(segment_text("It rained. 3 people left.", SegmentMode::prose).units.size(), 2u);
  EXPECT_EQ(segment_text("Wait!! What?", SegmentMode::prose).units.size(), 2u);
  EXPECT_EQ(segment_text("Version 2.5 Is out.", SegmentMode::prose).units.size(), 1u);
}

TEST(Segment, EmptyInput) {
  try {
    segment_text("   \n\t", SegmentMode::prose);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(Segment, MalformedMR) {
  for (const char* text : {"name[Alameda", "name]x[", "name[a[b], area[c]"}) {
    try {
      segment_text(text, SegmentMode::e2e_mr);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedMR) << text;
    }
  }
}

TEST(Segment, CommaInsideBracketsStaysInUnit) {
  auto d = segment_text("food[Fast food, cheap], area[riverside]", SegmentMode::e2e_mr);
  EXPECT_EQ(unit_texts(d), (std::vector<std::string>{"food[Fast food, cheap]", "area[riverside]"}));
}

TEST(Segment, ReconstructionProperty) {
  std::mt19937 rng(7);
  const std::vector<std::string> words = {"the", "cat", "Sat", "on", "a", "Mat", "42", "Blue", "sky"};
  const std::vector<std::string> ends = {".", "!", "?", "..."};
  const std::vector<std::string> seps = {" ", "  ", "\n", " \t "};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const int sentences = 1 + static_cast<int>(rng() % 5);
    for (int s = 0; s < sentences; ++s) {
      if (s) text += seps[rng() % seps.size()];
      const int n = 1 + static_cast<int>(rng() % 6);
      for (int w = 0; w < n; ++w) text += (w ? " " : "") + words[rng() % words.size()];
      text += ends[rng() % ends.size()];
    }
    auto d = segment_text(text, SegmentMode::prose);
    EXPECT_EQ(reconstruct(d), text);
    for (std::size_t k = 0; k < d.units.size(); ++k) {
      EXPECT_GT(d.units[k].char_span.end, d.units[k].char_span.begin);
      EXPECT_EQ(d.units[k].text, text.substr(d.units[k].char_span.begin, d.units[k].char_span.size()));
      if (k) {
        EXPECT_GE(d.units[k].char_span.begin, d.units[k - 1].char_span.end);
      }
    }
    EXPECT_EQ(unit_texts(segment_text(text, SegmentMode::prose)), unit_texts(d));
  }
}

TEST(Vocab, FrequencyThenLexicographic) {
  Vocab v = build_vocab({"a b", "a c"}, 16);
  ASSERT_TRUE(v.contains("a") && v.contains("b") && v.contains("c"));
  EXPECT_LT(v.id("a"), v.id("b"));
  EXPECT_LT(v.id("b"), v.id("c"));
  EXPECT_EQ(v.id("a"), kReservedCount);
  EXPECT_EQ(v.size(), 8u);
}

TEST(Vocab, SizeCap) {
  EXPECT_EQ(build_vocab({"x"}, 6).size(), 6u);
  Vocab v = build_vocab({"z z z y y x w"}, 7);
  EXPECT_EQ(v.size(), 7u);
  EXPECT_TRUE(v.contains("z"));
  EXPECT_TRUE(v.contains("y"));
  EXPECT_FALSE(v.contains("x"));
}

TEST(Vocab, EmptyCorpusRejected) { EXPECT_THROW(build_vocab({}, 16), Error); }

TEST(Vocab, ReservedTokens) {
  Vocab v;
  EXPECT_EQ(v.token(kPad), "<pad>");
  EXPECT_EQ(v.token(kBos), "<bos>");
  EXPECT_EQ(v.token(kEos), "<eos>");
  EXPECT_EQ(v.token(kUnk), "<unk>");
  EXPECT_EQ(v.token(kMask), "<mask>");
}

TEST(Vocab, StableRebuildAndSaveLoad) {
  const std::vector<std::string> corpus = {"The cat sat.", "A dog ran, the cat sat!", "Dogs and cats"};
  Vocab a = build_vocab(corpus, 32), b = build_vocab(corpus, 32);
  EXPECT_EQ(a.tokens(), b.tokens());
  const auto path = (std::filesystem::temp_directory_path() / "live_vocab_test.txt").string();
  a.save(path);
  EXPECT_EQ(Vocab::load(path).tokens(), a.tokens());
  std::filesystem::remove(path);
}

TEST(WordPieces, PunctuationSplitsAndLowercases) {
  EXPECT_EQ(word_pieces("Hello, World!"), (std::vector<std::string>{"hello", ",", "world", "!"}));
  EXPECT_EQ(word_pieces("name[Alameda]"), (std::vector<std::string>{"name", "[", "alameda", "]"}));
}

TEST(Tokenize, SingleUnit) {
  Vocab v = Vocab::from_tokens({"a", "b"});
  auto d = segment_text("a b", SegmentMode::prose);
  auto t = tokenize(d, v);
  EXPECT_EQ(t.ids, (std::vector<TokenId>{kBos, v.id("a"), v.id("b"), kEos}));
  EXPECT_EQ(d.units[0].token_span, (Span{1, 3}));
}

TEST(Tokenize, UnknownWord) {
  Vocab v = Vocab::from_tokens({"a"});
  auto d = segment_text("a zebra", SegmentMode::prose);
  EXPECT_EQ(tokenize(d, v).ids, (std::vector<TokenId>{kBos, v.id("a"), kUnk, kEos}));
}

TEST(Tokenize, AdjacentSpans) {
  // "a." -> pieces a, '.'; "B." -> b, '.' ; spans [1,3) and [3,5).
  Vocab v = Vocab::from_tokens({"a", "b", "."});
  auto d = segment_text("a. B.", SegmentMode::prose);
  ASSERT_EQ(d.units.size(), 2u);
  auto t = tokenize(d, v);
  EXPECT_EQ(d.units[0].token_span, (Span{1, 3}));
  EXPECT_EQ(d.units[1].token_span, (Span{3, 5}));
  EXPECT_EQ(t.ids.size(), 6u);
  EXPECT_EQ(t.unit_of, (std::vector<int>{-1, 0, 0, 1, 1, -1}));
}

TEST(Tokenize, SpansCoverInterior) {
  Vocab v = build_vocab({"one two. Three four five! Six?"}, 32);
  auto d = segment_text("one two. Three four five! Six?", SegmentMode::prose);
  auto t = tokenize(d, v);
  std::size_t cursor = 1;
  for (const auto& u : d.units) {
    EXPECT_EQ(u.token_span.begin, cursor);
    cursor = u.token_span.end;
  }
  EXPECT_EQ(cursor, t.ids.size() - 1);
}

TEST(EncodeDecode, RoundTrip) {
  Vocab v = Vocab::from_tokens({"the", "cat", "sat"});
  auto ids = encode("The cat sat", v);
  EXPECT_EQ(ids.front(), kBos);
  EXPECT_EQ(ids.back(), kEos);
  EXPECT_EQ(decode(ids, v), "the cat sat");
}
