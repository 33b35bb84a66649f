#include "live/digest.hpp"

#include <gtest/gtest.h>

using namespace live;

TEST(Digest, KnownSha256) {
  EXPECT_EQ(to_hex(sha256("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(to_hex(sha256("")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Digest, Normalization) {
  EXPECT_EQ(normalize_sentence("  The \t Cat\n "), "the cat");
  EXPECT_EQ(sentence_key("  The  Cat "), sentence_key("the cat"));
  EXPECT_NE(sentence_key("the cat"), sentence_key("the cats"));
}

TEST(Digest, DerivedSeeds) {
  EXPECT_EQ(derive_seed(42, "pretrain"), derive_seed(42, "pretrain"));
  EXPECT_NE(derive_seed(42, "pretrain"), derive_seed(42, "finetune"));
  EXPECT_NE(derive_seed(42, "pretrain"), derive_seed(43, "pretrain"));
  // First eight digest bytes of "pretrain:42", little-endian.
  const Digest d = sha256("pretrain:42");
  std::uint64_t expect = 0;
  for (int i = 7; i >= 0; --i) expect = (expect << 8) | d[static_cast<std::size_t>(i)];
  EXPECT_EQ(derive_seed(42, "pretrain"), expect);
}

TEST(Base64, RoundTrip) {
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'M', 'a', 'n'}), "TWFu");
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'M', 'a'}), "TWE=");
  for (std::size_t n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> bytes(n);
    for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<std::uint8_t>(i * 37 + 11);
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes) << n;
  }
}
