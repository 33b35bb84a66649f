#pragma once

#include "live/error.hpp"
#include "live/types.hpp"

#include <cstdint>
#include <cstring>
#include <string>
#include <unordered_map>
#include <vector>

namespace live {

// Which training stage may update a tensor. Pretraining touches only fusion
// and projection; fine-tuning touches everything.
enum class Partition : std::uint8_t { backbone = 0, fusion = 1, projection = 2 };

std::string to_string(Partition p);

template <typename Scalar>
struct Param {
  std::string name;
  Partition partition;
  Mat<Scalar> value;
};

template <typename Scalar>
class ParamSet {
 public:
  int add(std::string name, Partition partition, Mat<Scalar> value) {
    if (index_.count(name)) throw Error(ErrorCode::InvalidArgument, "duplicate parameter " + name);
    index_.emplace(name, static_cast<int>(params_.size()));
    params_.push_back({std::move(name), partition, std::move(value)});
    return static_cast<int>(params_.size()) - 1;
  }

  std::size_t size() const { return params_.size(); }
  Param<Scalar>& operator[](std::size_t i) { return params_[i]; }
  const Param<Scalar>& operator[](std::size_t i) const { return params_[i]; }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count(Partition p) const {
    std::size_t n = 0;
    for (const auto& q : params_)
      if (q.partition == p) n += static_cast<std::size_t>(q.value.size());
    return n;
  }

  // FNV-1a over the raw bytes of every tensor in the partition.
  std::uint64_t checksum(Partition p) const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& q : params_) {
      if (q.partition != p) continue;
      const auto* bytes = reinterpret_cast<const unsigned char*>(q.value.data());
      for (std::size_t i = 0; i < sizeof(Scalar) * static_cast<std::size_t>(q.value.size()); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
      }
    }
    return h;
  }

  template <typename To>
  ParamSet<To> cast() const {
    ParamSet<To> out;
    for (const auto& q : params_) out.add(q.name, q.partition, q.value.template cast<To>());
    return out;
  }

  // Bitwise equality of every tensor in the partition.
  bool identical(const ParamSet& o, Partition p) const {
    for (const auto& q : params_) {
      if (q.partition != p) continue;
      const int j = o.find(q.name);
      if (j < 0) return false;
      const auto& v = o[static_cast<std::size_t>(j)].value;
      if (v.rows() != q.value.rows() || v.cols() != q.value.cols()) return false;
      if (std::memcmp(v.data(), q.value.data(), sizeof(Scalar) * static_cast<std::size_t>(v.size())) != 0) return false;
    }
    return true;
  }

 private:
  std::vector<Param<Scalar>> params_;
  std::unordered_map<std::string, int> index_;
};

// Gradients aligned index-for-index with a ParamSet.
template <typename Scalar>
using GradSet = std::vector<Mat<Scalar>>;

template <typename Scalar>
GradSet<Scalar> zero_grads(const ParamSet<Scalar>& params) {
  GradSet<Scalar> g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(Mat<Scalar>::Zero(p.value.rows(), p.value.cols()));
  return g;
}

inline std::string to_string(Partition p) {
  switch (p) {
    case Partition::backbone: return "backbone";
    case Partition::fusion: return "fusion";
    case Partition::projection: return "projection";
  }
  return "?";
}

}  // namespace live
