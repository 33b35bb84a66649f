#include "live/embed_cache.hpp"

#include "live/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace live {

static_assert(std::endian::native == std::endian::little, "LIVC I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'L', 'I', 'V', 'C'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void read(void* dst, std::size_t n) {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorCode::TruncatedFile, "cache ends at byte " + std::to_string(bytes_.size()) + ", needed " +
                                                std::to_string(pos_ + n));
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  template <typename T>
  T get() {
    T v;
    read(&v, sizeof(T));
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void check_values(const ImageEmbedding& e) {
  if (!std::isfinite(e.gamma) || !e.patches.allFinite())
    throw Error(ErrorCode::NonFinite, "embedding " + to_hex(e.key) + " has NaN/Inf");
  if (e.gamma < -1.0f || e.gamma > 1.0f)
    throw Error(ErrorCode::OutOfRange, "embedding gamma " + std::to_string(e.gamma) + " outside [-1, 1]");
}

}  // namespace

bool ImageEmbedding::operator==(const ImageEmbedding& o) const {
  if (key != o.key || patches.rows() != o.patches.rows() || patches.cols() != o.patches.cols()) return false;
  return std::memcmp(&gamma, &o.gamma, sizeof(float)) == 0 &&
         std::memcmp(patches.data(), o.patches.data(), sizeof(float) * static_cast<std::size_t>(patches.size())) == 0;
}

ImageEmbedding make_embedding(std::string_view sentence, double gamma, MatF patches) {
  return {sentence_key(sentence), static_cast<float>(gamma), std::move(patches)};
}

EmbeddingCache::EmbeddingCache(std::size_t p, std::size_t d) : p_(p), d_(d) {
  if (p == 0 || d == 0) throw Error(ErrorCode::InvalidArgument, "cache p and d must be positive");
}

void EmbeddingCache::store(const ImageEmbedding& emb) {
  if (emb.p() != p_ || emb.d() != d_)
    throw Error(ErrorCode::ShapeMismatch, "embedding is " + std::to_string(emb.p()) + "x" + std::to_string(emb.d()) +
                                              ", cache holds " + std::to_string(p_) + "x" + std::to_string(d_));
  check_values(emb);
  entries_.insert_or_assign(emb.key, emb);
}

std::optional<ImageEmbedding> EmbeddingCache::lookup(std::string_view sentence) const {
  return lookup(sentence_key(sentence));
}

std::optional<ImageEmbedding> EmbeddingCache::lookup(const Digest& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string EmbeddingCache::serialize() const {
  std::string out;
  out.reserve(kHeaderBytes + entries_.size() * entry_bytes());
  out.append(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p_));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d_));
  put<std::uint64_t>(out, entries_.size());
  for (const auto& [key, e] : entries_) {
    out.append(reinterpret_cast<const char*>(key.data()), key.size());
    put<float>(out, e.gamma);
    out.append(reinterpret_cast<const char*>(e.patches.data()), sizeof(float) * p_ * d_);
  }
  return out;
}

EmbeddingCache EmbeddingCache::deserialize(std::string_view bytes) {
  Reader r(bytes);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::BadMagic, "not a LIVC cache");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw Error(ErrorCode::UnsupportedVersion, "LIVC version " + std::to_string(version));
  const auto p = r.get<std::uint32_t>();
  const auto d = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (p == 0 || d == 0) throw Error(ErrorCode::CorruptFile, "LIVC header has zero p or d");
  EmbeddingCache cache(p, d);
  const std::size_t per_entry = cache.entry_bytes();
  if (count > r.remaining() / per_entry)
    throw Error(ErrorCode::TruncatedFile, "header promises " + std::to_string(count) + " entries, file holds " +
                                              std::to_string(r.remaining() / per_entry));
  for (std::uint64_t i = 0; i < count; ++i) {
    ImageEmbedding e;
    r.read(e.key.data(), e.key.size());
    e.gamma = r.get<float>();
    e.patches.resize(p, d);
    r.read(e.patches.data(), sizeof(float) * p * d);
    if (cache.entries_.count(e.key)) throw Error(ErrorCode::CorruptFile, "duplicate key " + to_hex(e.key));
    check_values(e);
    cache.entries_.emplace(e.key, std::move(e));
  }
  if (r.remaining() != 0)
    throw Error(ErrorCode::CorruptFile, std::to_string(r.remaining()) + " trailing bytes after last entry");
  return cache;
}

void EmbeddingCache::persist(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp);
    const std::string bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename " + tmp + " -> " + path + ": " + ec.message());
}

EmbeddingCache EmbeddingCache::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

bool EmbeddingCache::operator==(const EmbeddingCache& o) const {
  return p_ == o.p_ && d_ == o.d_ && entries_ == o.entries_;
}

}  // namespace live
