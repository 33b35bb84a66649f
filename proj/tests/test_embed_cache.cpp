#include "live/embed_cache.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace live;
using live::testing::random_cache;
using live::testing::random_patches;

namespace {

ErrorCode load_error(std::string_view bytes) {
  try {
    EmbeddingCache::deserialize(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Cache, StoreLookup) {
  std::mt19937_64 rng(1);
  EmbeddingCache c(2, 3);
  auto e = make_embedding("the cat", 0.5, random_patches(2, 3, rng));
  c.store(e);
  ASSERT_TRUE(c.lookup("the cat"));
  EXPECT_EQ(*c.lookup("the cat"), e);
  EXPECT_TRUE(c.lookup("  The  Cat "));
  EXPECT_FALSE(c.lookup("the dog"));
}

TEST(Cache, LastWriteWins) {
  std::mt19937_64 rng(2);
  EmbeddingCache c(2, 3);
  c.store(make_embedding("x", 0.1, random_patches(2, 3, rng)));
  c.store(make_embedding("x", 0.7, random_patches(2, 3, rng)));
  EXPECT_EQ(c.size(), 1u);
  EXPECT_EQ(c.lookup("x")->gamma, 0.7f);
}

TEST(Cache, StoreGuards) {
  EmbeddingCache c(2, 3);
  auto code = [&](const ImageEmbedding& e) {
    try {
      c.store(e);
    } catch (const Error& err) {
      return err.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code(make_embedding("x", 0.1, MatF::Zero(3, 3))), ErrorCode::ShapeMismatch);
  MatF bad = MatF::Zero(2, 3);
  bad(0, 0) = std::numeric_limits<float>::infinity();
  EXPECT_EQ(code(make_embedding("x", 0.1, bad)), ErrorCode::NonFinite);
  EXPECT_EQ(code(make_embedding("x", 1.5, MatF::Zero(2, 3))), ErrorCode::OutOfRange);
  EXPECT_EQ(c.size(), 0u);
}

TEST(Cache, LayoutSizes) {
  std::mt19937_64 rng(3);
  EmbeddingCache c(2, 3);
  EXPECT_EQ(c.serialize().size(), 24u);
  c.store(make_embedding("x", 0.25, random_patches(2, 3, rng)));
  EXPECT_EQ(c.serialize().size(), 24u + 60u);
}

TEST(Cache, HeaderBytes) {
  std::mt19937_64 rng(4);
  EmbeddingCache c(2, 3);
  c.store(make_embedding("x", 0.25, random_patches(2, 3, rng)));
  const std::string b = c.serialize();
  EXPECT_EQ(b.substr(0, 4), "LIVC");
  auto u32 = [&](std::size_t off) {
    std::uint32_t v;
    std::memcpy(&v, b.data() + off, 4);
    return v;
  };
  std::uint64_t count;
  std::memcpy(&count, b.data() + 16, 8);
  EXPECT_EQ(u32(4), 1u);
  EXPECT_EQ(u32(8), 2u);
  EXPECT_EQ(u32(12), 3u);
  EXPECT_EQ(count, 1u);
  const Digest k = sentence_key("x");
  EXPECT_EQ(std::memcmp(b.data() + 24, k.data(), 32), 0);
  float g;
  std::memcpy(&g, b.data() + 56, 4);
  EXPECT_EQ(g, 0.25f);
  EXPECT_EQ(std::memcmp(b.data() + 60, c.lookup("x")->patches.data(), 24), 0);
}

TEST(Cache, RoundTripRandom) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    auto c = random_cache(rng);
    const std::string bytes = c.serialize();
    auto back = EmbeddingCache::deserialize(bytes);
    EXPECT_TRUE(back == c);
    EXPECT_EQ(back.serialize(), bytes);
  }
}

TEST(Cache, PersistAndLoad) {
  std::mt19937_64 rng(6);
  auto c = random_cache(rng);
  const auto path = (std::filesystem::temp_directory_path() / "live_cache_test.livc").string();
  c.persist(path);
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  EXPECT_TRUE(EmbeddingCache::load(path) == c);
  std::filesystem::remove(path);
}

TEST(Cache, TruncationAtEveryByte) {
  std::mt19937_64 rng(7);
  EmbeddingCache c(2, 2);
  for (int i = 0; i < 3; ++i) c.store(make_embedding(std::to_string(i), 0.0, random_patches(2, 2, rng)));
  const std::string bytes = c.serialize();
  for (std::size_t n = 0; n < bytes.size(); ++n)
    EXPECT_EQ(load_error(std::string_view(bytes).substr(0, n)), ErrorCode::TruncatedFile) << n;
}

TEST(Cache, HeaderErrors) {
  EmbeddingCache c(1, 1);
  std::string bytes = c.serialize();
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(load_error(magic), ErrorCode::BadMagic);
  std::string version = bytes;
  version[4] = 2;
  EXPECT_EQ(load_error(version), ErrorCode::UnsupportedVersion);
  EXPECT_EQ(load_error(bytes + "z"), ErrorCode::CorruptFile);
}

TEST(Cache, DuplicateKeyRejected) {
  EmbeddingCache c(1, 1);
  c.store(make_embedding("x", 0.0, MatF::Zero(1, 1)));
  std::string bytes = c.serialize();
  std::string entry = bytes.substr(24);
  std::string dup = bytes.substr(0, 16);
  const std::uint64_t two = 2;
  dup.append(reinterpret_cast<const char*>(&two), 8);
  dup += entry + entry;
  EXPECT_EQ(load_error(dup), ErrorCode::CorruptFile);
}
