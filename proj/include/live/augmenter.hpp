#pragma once

#include "live/error.hpp"
#include "live/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace live {

struct AugmentRequest {
  std::string sentence;
  std::uint32_t steps = 25;  // diffusion steps; only the remote backend consumes it
  std::uint64_t seed = 0;
  std::size_t patch_count = 50;
  std::size_t dim = 768;

  void validate() const;
};

// One synthesized image, already encoded: visuality score plus p x d patches.
struct RawAugmentation {
  double gamma = 0.0;
  MatF patches;
};

enum class BackendKind { mock, remote, noise };

BackendKind parse_backend(const std::string& name);
std::string to_string(BackendKind kind);

// Throws ShapeMismatch / NonFinite / OutOfRange when a result violates the
// codomain contract. Every backend runs this before returning.
void check_augmentation(const AugmentRequest& req, const RawAugmentation& out);

class Augmenter {
 public:
  virtual ~Augmenter() = default;

  // Results are returned in request order.
  virtual std::vector<RawAugmentation> augment_batch(std::span<const AugmentRequest> reqs) = 0;

  RawAugmentation augment(const AugmentRequest& req) {
    return augment_batch(std::span(&req, 1)).front();
  }

  virtual BackendKind kind() const = 0;
};

// Deterministic stand-in for synthesis + scoring. Patches are standard
// normals seeded from the sentence digest and the request seed; gamma is
// derived from the digest unless a fixture overrides it.
class MockAugmenter final : public Augmenter {
 public:
  MockAugmenter() = default;
  explicit MockAugmenter(std::unordered_map<std::string, double> gamma_fixture);

  // JSON object mapping sentence -> gamma.
  static MockAugmenter from_fixture_file(const std::string& path);

  std::vector<RawAugmentation> augment_batch(std::span<const AugmentRequest> reqs) override;
  BackendKind kind() const override { return BackendKind::mock; }

  static double hashed_gamma(const std::string& sentence);

 private:
  std::unordered_map<std::string, double> fixture_;  // keyed by normalized sentence
};

// Random-noise ablation: patches ~ N(0, 1) from the request seed alone and a
// gamma of 1 so every image passes the gate.
class NoiseAugmenter final : public Augmenter {
 public:
  std::vector<RawAugmentation> augment_batch(std::span<const AugmentRequest> reqs) override;
  BackendKind kind() const override { return BackendKind::noise; }
};

struct RemoteOptions {
  std::string url = "http://127.0.0.1:8765";
  int timeout_seconds = 300;
  int max_attempts = 3;
  int retry_delay_ms = 500;
};

// Speaks the sidecar protocol: POST /v1/augment with up to 64 sentences.
class RemoteAugmenter final : public Augmenter {
 public:
  static constexpr std::size_t kMaxBatch = 64;

  explicit RemoteAugmenter(RemoteOptions options);

  std::vector<RawAugmentation> augment_batch(std::span<const AugmentRequest> reqs) override;
  BackendKind kind() const override { return BackendKind::remote; }

  bool healthy() const;

 private:
  RemoteOptions options_;
};

std::unique_ptr<Augmenter> make_augmenter(BackendKind kind, const std::string& fixture_path = {},
                                          const RemoteOptions& remote = {});

// Cosine similarity of two unit vectors, clamped into [-1, 1].
template <typename A, typename B>
double score_visuality(const Eigen::MatrixBase<A>& text_vec, const Eigen::MatrixBase<B>& image_vec) {
  if (text_vec.size() != image_vec.size() || text_vec.size() == 0)
    throw Error(ErrorCode::DimensionMismatch, "visuality vectors differ in dimension");
  const Eigen::VectorXd t = text_vec.template cast<double>().reshaped();
  const Eigen::VectorXd i = image_vec.template cast<double>().reshaped();
  const double dot = t.dot(i);
  return std::clamp(dot, -1.0, 1.0);
}

}  // namespace live
