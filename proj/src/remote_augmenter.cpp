#include "live/augmenter.hpp"

#include "live/digest.hpp"

#include "httplib.h"
#include "json.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <thread>

namespace live {

namespace {

static_assert(std::endian::native == std::endian::little, "patch payload decoding assumes a little-endian host");

bool same_shape_and_knobs(const AugmentRequest& a, const AugmentRequest& b) {
  return a.steps == b.steps && a.seed == b.seed && a.patch_count == b.patch_count && a.dim == b.dim;
}

MatF decode_patches(const std::string& b64, const AugmentRequest& req) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64_decode(b64);
  } catch (const Error& e) {
    throw Error(ErrorCode::ShapeMismatch, std::string("undecodable patch payload: ") + e.what());
  }
  const std::size_t expected = 4 * req.patch_count * req.dim;
  if (bytes.size() != expected)
    throw Error(ErrorCode::ShapeMismatch, "patch payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                                              std::to_string(expected));
  MatF m(static_cast<Eigen::Index>(req.patch_count), static_cast<Eigen::Index>(req.dim));
  std::memcpy(m.data(), bytes.data(), bytes.size());
  return m;
}

}  // namespace

RemoteAugmenter::RemoteAugmenter(RemoteOptions options) : options_(std::move(options)) {}

bool RemoteAugmenter::healthy() const {
  httplib::Client cli(options_.url);
  cli.set_connection_timeout(5);
  auto res = cli.Get("/v1/health");
  return res && res->status == 200;
}

std::vector<RawAugmentation> RemoteAugmenter::augment_batch(std::span<const AugmentRequest> reqs) {
  std::vector<RawAugmentation> out(reqs.size());
  httplib::Client cli(options_.url);
  cli.set_connection_timeout(options_.timeout_seconds);
  cli.set_read_timeout(options_.timeout_seconds);

  std::size_t begin = 0;
  while (begin < reqs.size()) {
    // A wire request carries one set of knobs, so batch runs of equal knobs.
    std::size_t end = begin + 1;
    while (end < reqs.size() && end - begin < kMaxBatch && same_shape_and_knobs(reqs[begin], reqs[end])) ++end;
    const AugmentRequest& head = reqs[begin];
    head.validate();

    nlohmann::json body;
    body["sentences"] = nlohmann::json::array();
    for (std::size_t i = begin; i < end; ++i) body["sentences"].push_back(reqs[i].sentence);
    body["steps"] = head.steps;
    body["seed"] = head.seed;
    body["patch_count"] = head.patch_count;
    body["dim"] = head.dim;
    const std::string payload = body.dump();

    httplib::Result res;
    for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
      res = cli.Post("/v1/augment", payload, "application/json");
      if (res && res->status != 503) break;
      if (attempt + 1 < options_.max_attempts) std::this_thread::sleep_for(std::chrono::milliseconds(options_.retry_delay_ms));
    }
    if (!res) throw Error(ErrorCode::RemoteUnavailable, "sidecar at " + options_.url + ": " + httplib::to_string(res.error()));
    if (res->status == 503) throw Error(ErrorCode::RemoteUnavailable, "sidecar at " + options_.url + " not ready (503)");
    if (res->status != 200)
      throw Error(ErrorCode::InvalidArgument, "sidecar rejected request with HTTP " + std::to_string(res->status));

    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ShapeMismatch, std::string("sidecar returned invalid JSON: ") + e.what());
    }
    if (!reply.contains("results"))
      throw Error(ErrorCode::ShapeMismatch, "sidecar reply lacks 'results'");
    const auto& results = reply["results"];
    if (!results.is_array() || results.size() != end - begin)
      throw Error(ErrorCode::ShapeMismatch, "sidecar returned " + std::to_string(results.size()) + " results for " +
                                                std::to_string(end - begin) + " sentences");
    for (std::size_t i = begin; i < end; ++i) {
      const auto& r = results[i - begin];
      RawAugmentation aug;
      try {
        aug.gamma = r.at("gamma").get<double>();
        aug.patches = decode_patches(r.at("patches_b64").get<std::string>(), reqs[i]);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ShapeMismatch, std::string("malformed sidecar result: ") + e.what());
      }
      check_augmentation(reqs[i], aug);
      out[i] = std::move(aug);
    }
    begin = end;
  }
  return out;
}

}  // namespace live
