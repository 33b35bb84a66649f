#include "live/tape.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace live;

namespace {

using M = MatD;
using V = Var<double>;
using Op = std::function<V(Tape<double>&, const std::vector<V>&)>;

M random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  M m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Reduces any output to a scalar through fixed random projections u^T Y w.
struct Probe {
  M u, w;
  V apply(Tape<double>& t, V y) const { return matmul(matmul(t.constant(u), y), t.constant(w)); }
};

double run(const Op& op, const std::vector<M>& inputs, const Probe& probe, std::vector<M>* grads) {
  Tape<double> t;
  std::vector<V> vars;
  if (grads) {
    grads->clear();
    for (const auto& x : inputs) grads->push_back(M::Zero(x.rows(), x.cols()));
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(t.param(inputs[i], grads ? &(*grads)[i] : nullptr));
  V out = probe.apply(t, op(t, vars));
  if (grads) t.backward(out);
  return out.value()(0, 0);
}

// Central differences against the tape for every input coordinate.
void check_gradients(const Op& op, std::vector<M> inputs, std::mt19937_64& rng, double tol = 1e-7) {
  Tape<double> shape_tape;
  std::vector<V> vars;
  for (const auto& x : inputs) vars.push_back(shape_tape.constant(x));
  const V y = op(shape_tape, vars);
  const Probe probe{random_matrix(1, y.rows(), rng), random_matrix(y.cols(), 1, rng)};

  std::vector<M> analytic;
  run(op, inputs, probe, &analytic);
  const double h = 1e-5;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (Eigen::Index k = 0; k < inputs[i].size(); ++k) {
      const double keep = inputs[i].data()[k];
      inputs[i].data()[k] = keep + h;
      const double up = run(op, inputs, probe, nullptr);
      inputs[i].data()[k] = keep - h;
      const double down = run(op, inputs, probe, nullptr);
      inputs[i].data()[k] = keep;
      const double numeric = (up - down) / (2 * h);
      EXPECT_NEAR(analytic[i].data()[k], numeric, tol * std::max(1.0, std::abs(numeric)))
          << "input " << i << " coord " << k;
    }
}

}  // namespace

TEST(TapeGrad, MatmulFamily) {
  std::mt19937_64 rng(1);
  check_gradients([](auto&, const auto& v) { return matmul(v[0], v[1]); },
                  {random_matrix(3, 4, rng), random_matrix(4, 2, rng)}, rng);
  check_gradients([](auto&, const auto& v) { return matmul_nt(v[0], v[1]); },
                  {random_matrix(3, 4, rng), random_matrix(5, 4, rng)}, rng);
  check_gradients([](auto&, const auto& v) { return linear(v[0], v[1], v[2]); },
                  {random_matrix(3, 4, rng), random_matrix(4, 2, rng), random_matrix(1, 2, rng)}, rng);
}

TEST(TapeGrad, Elementwise) {
  std::mt19937_64 rng(2);
  check_gradients([](auto&, const auto& v) { return v[0] + v[1]; }, {random_matrix(3, 4, rng), random_matrix(3, 4, rng)},
                  rng);
  check_gradients([](auto&, const auto& v) { return add_row(v[0], v[1]); },
                  {random_matrix(3, 4, rng), random_matrix(1, 4, rng)}, rng);
  check_gradients([](auto&, const auto& v) { return scale(v[0], 0.37); }, {random_matrix(3, 4, rng)}, rng);
  check_gradients([](auto&, const auto& v) { return gelu(v[0]); }, {random_matrix(3, 4, rng)}, rng);
}

TEST(TapeGrad, LayerNorm) {
  std::mt19937_64 rng(3);
  check_gradients([](auto&, const auto& v) { return layer_norm(v[0], v[1], v[2]); },
                  {random_matrix(3, 6, rng), random_matrix(1, 6, rng), random_matrix(1, 6, rng)}, rng, 1e-6);
}

TEST(TapeGrad, SoftmaxMasked) {
  std::mt19937_64 rng(4);
  AttnMask mask(3, 4);
  mask << true, false, true, true,  //
      false, false, false, false,   //
      true, true, true, true;
  check_gradients([&](auto&, const auto& v) { return softmax_rows(v[0], mask); }, {random_matrix(3, 4, rng)}, rng);
  check_gradients([](auto&, const auto& v) { return softmax_rows(v[0]); }, {random_matrix(2, 5, rng)}, rng);
}

TEST(TapeGrad, RowsAndColumns) {
  std::mt19937_64 rng(5);
  check_gradients([](auto&, const auto& v) { return gather_rows(v[0], {2, 0, 2}); }, {random_matrix(3, 4, rng)}, rng);
  check_gradients([](auto&, const auto& v) { return scatter_rows(v[0], {1, 3}, v[1]); },
                  {random_matrix(4, 3, rng), random_matrix(2, 3, rng)}, rng);
  check_gradients([](auto&, const auto& v) { return slice_rows(v[0], 1, 2); }, {random_matrix(4, 3, rng)}, rng);
  check_gradients([](auto&, const auto& v) { return slice_cols(v[0], 1, 2); }, {random_matrix(4, 3, rng)}, rng);
  check_gradients([](auto&, const auto& v) { return concat_rows(std::vector<V>{v[0], v[1]}); },
                  {random_matrix(2, 3, rng), random_matrix(1, 3, rng)}, rng);
  check_gradients([](auto&, const auto& v) { return concat_cols(std::vector<V>{v[0], v[1]}); },
                  {random_matrix(2, 3, rng), random_matrix(2, 1, rng)}, rng);
}

TEST(TapeGrad, CrossEntropy) {
  std::mt19937_64 rng(6);
  check_gradients(
      [](auto&, const auto& v) { return smoothed_cross_entropy_sum(v[0], {1, 0, 3}, 0.1, 0); },
      {random_matrix(3, 5, rng)}, rng);
}

TEST(Tape, SoftmaxRowsSumToOneAndMaskedZero) {
  std::mt19937_64 rng(7);
  Tape<double> t;
  AttnMask mask(2, 3);
  mask << true, false, true, false, false, false;
  const M p = softmax_rows(t.constant(random_matrix(2, 3, rng)), mask).value();
  EXPECT_NEAR(p.row(0).sum(), 1.0, 1e-12);
  EXPECT_EQ(p(0, 1), 0.0);
  EXPECT_EQ(p.row(1).sum(), 0.0);
}

TEST(Tape, ScatterKeepsOtherRowsBitIdentical) {
  std::mt19937_64 rng(8);
  Tape<float> t;
  MatF base = random_matrix(4, 3, rng).cast<float>();
  auto out = scatter_rows(t.constant(base), {2}, t.constant(MatF::Ones(1, 3))).value();
  for (int r : {0, 1, 3}) EXPECT_TRUE((out.row(r).array() == base.row(r).array()).all());
}

TEST(Tape, CrossEntropyValues) {
  Tape<double> t;
  // Uniform logits over 4 classes: ln 4 for any smoothing.
  for (double eps : {0.0, 0.1, 0.5})
    EXPECT_NEAR(smoothed_cross_entropy_sum(t.constant(M::Zero(1, 4)), {2}, eps, -1).value()(0, 0), std::log(4.0),
                1e-12);
  // V = 2, logits (0, 0), gold 0, eps 0.1: -(0.9 ln .5 + 0.1 ln .5) = ln 2.
  EXPECT_NEAR(smoothed_cross_entropy_sum(t.constant(M::Zero(1, 2)), {0}, 0.1, -1).value()(0, 0), std::log(2.0), 1e-12);
  // eps = 0 is plain cross-entropy.
  M logits(1, 3);
  logits << 1.0, 2.0, 0.5;
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
  EXPECT_NEAR(smoothed_cross_entropy_sum(t.constant(logits), {0}, 0.0, -1).value()(0, 0), lse - 1.0, 1e-12);
  // Ignored rows contribute nothing.
  EXPECT_EQ(smoothed_cross_entropy_sum(t.constant(logits), {0}, 0.0, 0).value()(0, 0), 0.0);
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tape<double> t;
  M sink = M::Zero(2, 2);
  V a = t.param(M::Identity(2, 2), &sink);
  V b = t.constant(M::Ones(2, 2));
  V s = matmul(matmul(t.constant(M::Ones(1, 2)), matmul(a, b)), t.constant(M::Ones(2, 1)));
  t.backward(s);
  EXPECT_FALSE(t.needs_grad(b));
  EXPECT_TRUE((sink.array() == 2.0).all());
}
