#pragma once

#include "live/digest.hpp"
#include "live/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace live {

struct ImageEmbedding {
  Digest key{};
  float gamma = 0.0f;
  MatF patches;  // p x d

  std::size_t p() const { return static_cast<std::size_t>(patches.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(patches.cols()); }

  bool operator==(const ImageEmbedding& o) const;
};

ImageEmbedding make_embedding(std::string_view sentence, double gamma, MatF patches);

// Sentence-keyed store of augmentation results with the LIVC on-disk layout:
//
//   "LIVC" | u32 version=1 | u32 p | u32 d | u64 entry_count
//   entry_count x ( 32-byte key | f32 gamma | p*d f32 row-major )
//
// All integers and floats little-endian. Entries are written in key order so
// the same contents always produce the same bytes.
class EmbeddingCache {
 public:
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 24;

  EmbeddingCache(std::size_t p, std::size_t d);

  std::size_t p() const { return p_; }
  std::size_t d() const { return d_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t entry_bytes() const { return 32 + 4 + 4 * p_ * d_; }

  // Upsert; throws ShapeMismatch, NonFinite or OutOfRange.
  void store(const ImageEmbedding& emb);
  std::optional<ImageEmbedding> lookup(std::string_view sentence) const;
  std::optional<ImageEmbedding> lookup(const Digest& key) const;

  const std::map<Digest, ImageEmbedding>& entries() const { return entries_; }

  std::string serialize() const;
  static EmbeddingCache deserialize(std::string_view bytes);

  // Writes to a sibling temp file, then renames over path.
  void persist(const std::string& path) const;
  static EmbeddingCache load(const std::string& path);

  bool operator==(const EmbeddingCache& o) const;

 private:
  std::size_t p_;
  std::size_t d_;
  std::map<Digest, ImageEmbedding> entries_;
};

}  // namespace live
