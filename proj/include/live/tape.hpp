#pragma once

// Reverse-mode differentiation over dense row-major Eigen matrices.
//
// A Tape records every operation of one forward pass. Var is a cheap handle
// (tape pointer + node index); free functions build new nodes. backward()
// seeds a 1x1 output and walks the nodes in reverse creation order, which is
// a valid topological order because inputs are always created first.

#include "live/types.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <string_view>
#include <vector>

namespace live {

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;

  const Mat<Scalar>& value() const { return tape->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Boolean attention mask: true = the key is visible to the query.
using AttnMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
class Tape {
 public:
  using M = Mat<Scalar>;

  struct Node {
    M value;
    M grad;
    bool needs_grad = false;
    std::string_view op;
    std::function<void(Tape&, int)> backward;
    M* grad_sink = nullptr;  // parameter gradient accumulator
  };

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(M value) { return push(std::move(value), false, "constant", {}); }

  // A trainable leaf. If sink is non-null, backward() adds the gradient into it.
  Var<Scalar> param(const M& value, M* sink) {
    auto v = push(value, sink != nullptr, "param", {});
    nodes_[static_cast<std::size_t>(v.id)].grad_sink = sink;
    return v;
  }

  Var<Scalar> push(M value, bool needs_grad, std::string_view op, std::function<void(Tape&, int)> backward) {
    nodes_.push_back({std::move(value), M(), needs_grad, op, std::move(backward), nullptr});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const M& value(Var<Scalar> v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  bool needs_grad(Var<Scalar> v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient slot of v, allocated as zeros on first use.
  M& grad(Var<Scalar> v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.size() == 0) n.grad = M::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  const M& upstream(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  // Seeds d(out)/d(out) = seed for a 1x1 output and propagates.
  void backward(Var<Scalar> out, Scalar seed = Scalar(1)) {
    grad(out)(0, 0) += seed;
    for (int id = out.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, id);
      if (n.grad_sink) *n.grad_sink += n.grad;
    }
  }

 private:
  std::vector<Node> nodes_;
};

namespace detail {

template <typename Scalar>
bool any_grad(std::initializer_list<Var<Scalar>> vs) {
  for (auto v : vs)
    if (v.tape->needs_grad(v)) return true;
  return false;
}

template <typename Scalar>
void accumulate(Tape<Scalar>& t, Var<Scalar> v, const Mat<Scalar>& g) {
  if (t.needs_grad(v)) t.grad(v) += g;
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  auto& t = *a.tape;
  return t.push(a.value() * b.value(), detail::any_grad({a, b}), "matmul", [a, b](Tape<Scalar>& t, int id) {
    const auto& g = t.upstream(id);
    if (t.needs_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
    if (t.needs_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
  });
}

// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(Var<Scalar> a, Var<Scalar> b) {
  auto& t = *a.tape;
  return t.push(a.value() * b.value().transpose(), detail::any_grad({a, b}), "matmul_nt",
                [a, b](Tape<Scalar>& t, int id) {
                  const auto& g = t.upstream(id);
                  if (t.needs_grad(a)) t.grad(a).noalias() += g * t.value(b);
                  if (t.needs_grad(b)) t.grad(b).noalias() += g.transpose() * t.value(a);
                });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  auto& t = *a.tape;
  return t.push(a.value() + b.value(), detail::any_grad({a, b}), "add", [a, b](Tape<Scalar>& t, int id) {
    detail::accumulate(t, a, t.upstream(id));
    detail::accumulate(t, b, t.upstream(id));
  });
}

// Adds a 1 x n row to every row of a.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> row) {
  auto& t = *a.tape;
  Mat<Scalar> out = a.value();
  out.rowwise() += row.value().row(0);
  return t.push(std::move(out), detail::any_grad({a, row}), "add_row", [a, row](Tape<Scalar>& t, int id) {
    const auto& g = t.upstream(id);
    detail::accumulate(t, a, g);
    if (t.needs_grad(row)) t.grad(row) += g.colwise().sum();
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  auto& t = *a.tape;
  return t.push(a.value() * s, t.needs_grad(a), "scale",
                [a, s](Tape<Scalar>& t, int id) { t.grad(a) += t.upstream(id) * s; });
}

// x W + b
template <typename Scalar>
Var<Scalar> linear(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b) {
  return add_row(matmul(x, w), b);
}

// tanh-approximated GELU; odd-ish, smooth, gelu(0) == 0.
template <typename Scalar>
Var<Scalar> gelu(Var<Scalar> a) {
  auto& t = *a.tape;
  const Scalar c = Scalar(0.7978845608028654);  // sqrt(2/pi)
  const Scalar k = Scalar(0.044715);
  Mat<Scalar> out = a.value().unaryExpr([c, k](Scalar x) {
    return Scalar(0.5) * x * (Scalar(1) + std::tanh(c * (x + k * x * x * x)));
  });
  return t.push(std::move(out), t.needs_grad(a), "gelu", [a, c, k](Tape<Scalar>& t, int id) {
    const auto& x = t.value(a);
    Mat<Scalar> d = x.unaryExpr([c, k](Scalar v) {
      const Scalar th = std::tanh(c * (v + k * v * v * v));
      return Scalar(0.5) * (Scalar(1) + th) +
             Scalar(0.5) * v * (Scalar(1) - th * th) * c * (Scalar(1) + Scalar(3) * k * v * v);
    });
    t.grad(a) += t.upstream(id).cwiseProduct(d);
  });
}

// Row-wise layer normalization with affine gain and bias rows.
template <typename Scalar>
Var<Scalar> layer_norm(Var<Scalar> a, Var<Scalar> gain, Var<Scalar> bias, Scalar eps = Scalar(1e-5)) {
  auto& t = *a.tape;
  const auto& x = a.value();
  const Eigen::Index n = x.cols();
  Mat<Scalar> xhat(x.rows(), n);
  Vec<Scalar> inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Mat<Scalar> out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return t.push(std::move(out), detail::any_grad({a, gain, bias}), "layer_norm",
                [a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), n](Tape<Scalar>& t, int id) {
                  const auto& g = t.upstream(id);
                  if (t.needs_grad(gain)) t.grad(gain) += g.cwiseProduct(xhat).colwise().sum();
                  if (t.needs_grad(bias)) t.grad(bias) += g.colwise().sum();
                  if (!t.needs_grad(a)) return;
                  Mat<Scalar> dxhat = (g.array().rowwise() * t.value(gain).row(0).array()).matrix();
                  auto& ga = t.grad(a);
                  for (Eigen::Index r = 0; r < g.rows(); ++r) {
                    const Scalar m1 = dxhat.row(r).mean();
                    const Scalar m2 = dxhat.row(r).dot(xhat.row(r)) / Scalar(n);
                    ga.row(r).array() += inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                  }
                });
}

// Row-wise softmax; masked-out entries get probability exactly 0. A row with
// no visible entry yields all zeros.
template <typename Scalar>
Var<Scalar> softmax_rows(Var<Scalar> a, const AttnMask& mask = {}) {
  auto& t = *a.tape;
  const auto& x = a.value();
  const bool masked = mask.size() != 0;
  Mat<Scalar> p = Mat<Scalar>::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (!masked || mask(r, c)) mx = std::max(mx, x(r, c));
    if (!std::isfinite(mx)) continue;
    Scalar sum = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (masked && !mask(r, c)) continue;
      p(r, c) = std::exp(x(r, c) - mx);
      sum += p(r, c);
    }
    p.row(r) /= sum;
  }
  return t.push(p, t.needs_grad(a), "softmax", [a](Tape<Scalar>& t, int id) {
    const auto& g = t.upstream(id);
    const auto& p = t.node(id).value;
    Vec<Scalar> dot = (g.cwiseProduct(p)).rowwise().sum();
    t.grad(a) += (p.array() * (g.colwise() - dot).array()).matrix();
  });
}

template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> a, std::vector<int> idx) {
  auto& t = *a.tape;
  Mat<Scalar> out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
  return t.push(std::move(out), t.needs_grad(a), "gather_rows", [a, idx = std::move(idx)](Tape<Scalar>& t, int id) {
    const auto& g = t.upstream(id);
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

// Copy of base with row idx[i] replaced by rows.row(i). Rows not listed are
// carried over bit-for-bit.
template <typename Scalar>
Var<Scalar> scatter_rows(Var<Scalar> base, std::vector<int> idx, Var<Scalar> rows) {
  auto& t = *base.tape;
  Mat<Scalar> out = base.value();
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(idx[i]) = rows.value().row(static_cast<Eigen::Index>(i));
  return t.push(std::move(out), detail::any_grad({base, rows}), "scatter_rows",
                [base, rows, idx = std::move(idx)](Tape<Scalar>& t, int id) {
                  const auto& g = t.upstream(id);
                  if (t.needs_grad(base)) {
                    Mat<Scalar> gb = g;
                    for (int r : idx) gb.row(r).setZero();
                    t.grad(base) += gb;
                  }
                  if (t.needs_grad(rows)) {
                    auto& gr = t.grad(rows);
                    for (std::size_t i = 0; i < idx.size(); ++i) gr.row(static_cast<Eigen::Index>(i)) += g.row(idx[i]);
                  }
                });
}

template <typename Scalar>
Var<Scalar> slice_rows(Var<Scalar> a, Eigen::Index begin, Eigen::Index count) {
  auto& t = *a.tape;
  return t.push(a.value().middleRows(begin, count), t.needs_grad(a), "slice_rows",
                [a, begin, count](Tape<Scalar>& t, int id) { t.grad(a).middleRows(begin, count) += t.upstream(id); });
}

template <typename Scalar>
Var<Scalar> slice_cols(Var<Scalar> a, Eigen::Index begin, Eigen::Index count) {
  auto& t = *a.tape;
  return t.push(a.value().middleCols(begin, count), t.needs_grad(a), "slice_cols",
                [a, begin, count](Tape<Scalar>& t, int id) { t.grad(a).middleCols(begin, count) += t.upstream(id); });
}

template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  auto& t = *parts.front().tape;
  Eigen::Index rows = 0;
  bool needs = false;
  for (auto p : parts) {
    rows += p.rows();
    needs = needs || t.needs_grad(p);
  }
  Mat<Scalar> out(rows, parts.front().cols());
  Eigen::Index r = 0;
  for (auto p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t.push(std::move(out), needs, "concat_rows", [parts](Tape<Scalar>& t, int id) {
    const auto& g = t.upstream(id);
    Eigen::Index r = 0;
    for (auto p : parts) {
      if (t.needs_grad(p)) t.grad(p) += g.middleRows(r, p.rows());
      r += p.rows();
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  auto& t = *parts.front().tape;
  Eigen::Index cols = 0;
  bool needs = false;
  for (auto p : parts) {
    cols += p.cols();
    needs = needs || t.needs_grad(p);
  }
  Mat<Scalar> out(parts.front().rows(), cols);
  Eigen::Index c = 0;
  for (auto p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.push(std::move(out), needs, "concat_cols", [parts](Tape<Scalar>& t, int id) {
    const auto& g = t.upstream(id);
    Eigen::Index c = 0;
    for (auto p : parts) {
      if (t.needs_grad(p)) t.grad(p) += g.middleCols(c, p.cols());
      c += p.cols();
    }
  });
}

// Sum over non-ignored rows of the cross-entropy between softmax(logits[r])
// and the smoothed target (1 - eps on the gold id, eps / (V - 1) elsewhere).
// Returns a 1x1 node; divide by the row count for the mean.
template <typename Scalar>
Var<Scalar> smoothed_cross_entropy_sum(Var<Scalar> logits, std::vector<int> targets, Scalar eps, int ignore_id) {
  auto& t = *logits.tape;
  const auto& x = logits.value();
  const Eigen::Index V = x.cols();
  Mat<Scalar> logp(x.rows(), V);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mx = x.row(r).maxCoeff();
    const Scalar lse = mx + std::log((x.row(r).array() - mx).exp().sum());
    logp.row(r) = x.row(r).array() - lse;
  }
  const Scalar off = V > 1 ? eps / Scalar(V - 1) : Scalar(0);
  Scalar total = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int gold = targets[static_cast<std::size_t>(r)];
    if (gold == ignore_id) continue;
    total -= off * (logp.row(r).sum() - logp(r, gold)) + (Scalar(1) - eps) * logp(r, gold);
  }
  Mat<Scalar> out(1, 1);
  out(0, 0) = total;
  return t.push(std::move(out), t.needs_grad(logits), "cross_entropy",
                [logits, targets = std::move(targets), eps, off, ignore_id, logp = std::move(logp)](Tape<Scalar>& t,
                                                                                                   int id) {
                  const Scalar g = t.upstream(id)(0, 0);
                  auto& gl = t.grad(logits);
                  for (Eigen::Index r = 0; r < logp.rows(); ++r) {
                    const int gold = targets[static_cast<std::size_t>(r)];
                    if (gold == ignore_id) continue;
                    // d/dlogits = softmax - q
                    RowVec<Scalar> q = RowVec<Scalar>::Constant(logp.cols(), off);
                    q(gold) = Scalar(1) - eps;
                    gl.row(r) += g * (logp.row(r).array().exp().matrix() - q);
                  }
                });
}

}  // namespace live
