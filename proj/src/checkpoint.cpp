#include "live/checkpoint.hpp"

#include <bit>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace live {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'L', 'I', 'V', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  void read(void* dst, std::size_t n) {
    if (bytes.size() - pos < n) throw Error(ErrorCode::TruncatedFile, "checkpoint truncated at byte " + std::to_string(pos));
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  }
  template <typename T>
  T get() {
    T v;
    read(&v, sizeof(T));
    return v;
  }
};

}  // namespace

std::string serialize_checkpoint(const ParamSet<float>& params) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.partition));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.cols()));
    out.append(reinterpret_cast<const char*>(p.value.data()), sizeof(float) * static_cast<std::size_t>(p.value.size()));
  }
  return out;
}

ParamSet<float> deserialize_checkpoint(const std::string& bytes) {
  Reader r{bytes};
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::BadMagic, "not a LIVM checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw Error(ErrorCode::UnsupportedVersion, "checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  ParamSet<float> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    if (len > bytes.size()) throw Error(ErrorCode::TruncatedFile, "tensor name length exceeds file");
    std::string name(len, '\0');
    r.read(name.data(), len);
    const auto part = r.get<std::uint8_t>();
    if (part > 2) throw Error(ErrorCode::CorruptFile, "tensor " + name + " has unknown partition " + std::to_string(part));
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (static_cast<std::uint64_t>(rows) * cols * 4 > bytes.size() - r.pos)
      throw Error(ErrorCode::TruncatedFile, "tensor " + name + " data truncated");
    MatF m(rows, cols);
    r.read(m.data(), sizeof(float) * static_cast<std::size_t>(m.size()));
    params.add(name, static_cast<Partition>(part), std::move(m));
  }
  if (r.pos != bytes.size()) throw Error(ErrorCode::CorruptFile, "trailing bytes after last tensor");
  return params;
}

void save_checkpoint(const ParamSet<float>& params, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp);
    const auto bytes = serialize_checkpoint(params);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ParamSet<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace live
