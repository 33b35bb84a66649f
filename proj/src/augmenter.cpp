#include "live/augmenter.hpp"

#include "live/digest.hpp"

#include "json.hpp"

#include <fstream>
#include <random>

namespace live {

void AugmentRequest::validate() const {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "augment: steps must be >= 1");
  if (patch_count < 1) throw Error(ErrorCode::InvalidArgument, "augment: patch_count must be >= 1");
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "augment: dim must be >= 1");
}

BackendKind parse_backend(const std::string& name) {
  if (name == "mock") return BackendKind::mock;
  if (name == "remote") return BackendKind::remote;
  if (name == "noise") return BackendKind::noise;
  throw Error(ErrorCode::InvalidArgument, "unknown backend '" + name + "'");
}

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::mock: return "mock";
    case BackendKind::remote: return "remote";
    case BackendKind::noise: return "noise";
  }
  return "?";
}

void check_augmentation(const AugmentRequest& req, const RawAugmentation& out) {
  if (static_cast<std::size_t>(out.patches.rows()) != req.patch_count ||
      static_cast<std::size_t>(out.patches.cols()) != req.dim)
    throw Error(ErrorCode::ShapeMismatch,
                "expected " + std::to_string(req.patch_count) + "x" + std::to_string(req.dim) + " patches, got " +
                    std::to_string(out.patches.rows()) + "x" + std::to_string(out.patches.cols()));
  if (!std::isfinite(out.gamma) || !out.patches.allFinite())
    throw Error(ErrorCode::NonFinite, "augmentation for '" + req.sentence + "' contains NaN/Inf");
  if (out.gamma < -1.0 || out.gamma > 1.0)
    throw Error(ErrorCode::OutOfRange, "gamma " + std::to_string(out.gamma) + " outside [-1, 1]");
}

namespace {

MatF standard_normal(std::size_t rows, std::size_t cols, std::seed_seq& seq) {
  std::mt19937_64 rng(seq);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  MatF m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace

MockAugmenter::MockAugmenter(std::unordered_map<std::string, double> gamma_fixture) {
  for (auto& [sentence, gamma] : gamma_fixture) fixture_.emplace(normalize_sentence(sentence), gamma);
}

MockAugmenter MockAugmenter::from_fixture_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read gamma fixture " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "gamma fixture " + path + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "gamma fixture must be a JSON object");
  std::unordered_map<std::string, double> m;
  for (auto& [k, v] : j.items()) m.emplace(k, v.get<double>());
  return MockAugmenter(std::move(m));
}

double MockAugmenter::hashed_gamma(const std::string& sentence) {
  const Digest d = sentence_key(sentence);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[static_cast<std::size_t>(i)];
  // Lands in [0, 1), the non-negative part of the cosine range, so that
  // theta = 0 gates every sentence in as it does with real similarity scores.
  return static_cast<double>(v >> 11) * 0x1.0p-53;
}

std::vector<RawAugmentation> MockAugmenter::augment_batch(std::span<const AugmentRequest> reqs) {
  std::vector<RawAugmentation> out;
  out.reserve(reqs.size());
  for (const auto& req : reqs) {
    req.validate();
    const Digest d = sentence_key(req.sentence);
    std::vector<std::uint32_t> words;
    for (std::size_t i = 0; i < d.size(); i += 4)
      words.push_back(static_cast<std::uint32_t>(d[i]) | static_cast<std::uint32_t>(d[i + 1]) << 8 |
                      static_cast<std::uint32_t>(d[i + 2]) << 16 | static_cast<std::uint32_t>(d[i + 3]) << 24);
    words.push_back(static_cast<std::uint32_t>(req.seed));
    words.push_back(static_cast<std::uint32_t>(req.seed >> 32));
    std::seed_seq seq(words.begin(), words.end());

    RawAugmentation r;
    r.patches = standard_normal(req.patch_count, req.dim, seq);
    auto it = fixture_.find(normalize_sentence(req.sentence));
    r.gamma = it != fixture_.end() ? it->second : hashed_gamma(req.sentence);
    check_augmentation(req, r);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RawAugmentation> NoiseAugmenter::augment_batch(std::span<const AugmentRequest> reqs) {
  std::vector<RawAugmentation> out;
  out.reserve(reqs.size());
  for (const auto& req : reqs) {
    req.validate();
    std::seed_seq seq{static_cast<std::uint32_t>(req.seed), static_cast<std::uint32_t>(req.seed >> 32),
                      0x6e6f6973u};
    RawAugmentation r;
    r.patches = standard_normal(req.patch_count, req.dim, seq);
    r.gamma = 1.0;
    check_augmentation(req, r);
    out.push_back(std::move(r));
  }
  return out;
}

std::unique_ptr<Augmenter> make_augmenter(BackendKind kind, const std::string& fixture_path,
                                          const RemoteOptions& remote) {
  switch (kind) {
    case BackendKind::mock:
      if (fixture_path.empty()) return std::make_unique<MockAugmenter>();
      return std::make_unique<MockAugmenter>(MockAugmenter::from_fixture_file(fixture_path));
    case BackendKind::noise: return std::make_unique<NoiseAugmenter>();
    case BackendKind::remote: return std::make_unique<RemoteAugmenter>(remote);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown backend");
}

}  // namespace live
