#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "convdysat/error.hpp"
#include "convdysat/gradcheck.hpp"
#include "convdysat/ops.hpp"
#include "convdysat/parallel.hpp"
#include "helpers.hpp"

using namespace convdysat;
using testutil::random_tensor;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void expect_tensor_near(const Tensor& actual, const std::vector<double>& expected, double tol) {
  ASSERT_EQ(actual.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(actual[i], expected[i], tol) << "index " << i;
}

// Weighted sum against a fixed random tensor, so every output coordinate matters.
Var reduce(Tape& tape, const Var& out, std::uint64_t seed) {
  Var r = tape.constant(random_tensor(out.shape(), seed));
  return sum(multiply(out, r));
}

struct ThreadGuard {
  std::size_t saved = num_threads();
  ~ThreadGuard() { set_num_threads(saved); }
};

struct FaultGuard {
  ~FaultGuard() { convdysat::testing::inject_backward_fault("", 1.0); }
};

}  // namespace

TEST(Tensor, RejectsZeroExtentsAndMismatchedData) {
  EXPECT_THROW(Tensor(Shape{0, 2}), DimensionError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), DimensionError);
}

TEST(Tensor, ReshapeKeepsDataAndChecksSize) {
  Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_EQ(r.storage(), t.storage());
  EXPECT_THROW(t.reshaped({4, 2}), DimensionError);
}

TEST(Matmul, IdentityExample) {
  Tape tape;
  Var out = matmul(tape.constant(Tensor::matrix({{1, 0}, {0, 1}})), tape.constant(Tensor::matrix({{5, 6}, {7, 8}})));
  EXPECT_EQ(out.value().storage(), (std::vector<double>{5, 6, 7, 8}));
}

TEST(Matmul, RowTimesColumn) {
  Tape tape;
  Var out = matmul(tape.constant(Tensor::matrix({{1, 2}})), tape.constant(Tensor::matrix({{3}, {4}})));
  EXPECT_EQ(out.shape(), (Shape{1, 1}));
  EXPECT_EQ(out.value()[0], 11.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  try {
    matmul(tape.constant(Tensor(Shape{2, 3})), tape.constant(Tensor(Shape{2, 3})));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, IdentityTimesMatrixIsBitwiseEqual) {
  Tensor a(Shape{5, 7});
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(i % 13) * 0.25 - 1.5;
  Tensor eye(Shape{5, 5}, 0.0);
  for (std::size_t i = 0; i < 5; ++i) eye.at(i, i) = 1.0;
  Tape tape;
  Var out = matmul(tape.constant(eye), tape.constant(a));
  EXPECT_EQ(out.value().storage(), a.storage());
}

TEST(Matmul, MatchesNaiveTripleLoop) {
  const Tensor a = random_tensor({13, 17}, 1), b = random_tensor({17, 9}, 2);
  Tape tape;
  const Tensor& c = matmul(tape.constant(a), tape.constant(b)).value();
  for (std::size_t i = 0; i < 13; ++i) {
    for (std::size_t j = 0; j < 9; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 17; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-12);
    }
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Tensor a = random_tensor({3, 4}, 3), b = random_tensor({4, 2}, 4);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  std::vector<NamedTensor> inputs{{"a", &a}, {"b", &b}};
  auto result = finite_difference_check(
      [&](Tape& tape) { return reduce(tape, matmul(tape.leaf(a), tape.leaf(b)), 5); }, inputs);
  EXPECT_LT(result.max_rel_error, 1e-6);
  EXPECT_EQ(result.coordinates, 20u);
}

TEST(BatchedMatmul, MatchesPerBatchMatmulAndGradients) {
  Tensor a = random_tensor({3, 4, 5}, 6), b = random_tensor({3, 5, 2}, 7);
  {
    Tape tape;
    const Tensor& c = batched_matmul(tape.constant(a), tape.constant(b)).value();
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < 5; ++k) s += a.at(n, i, k) * b.at(n, k, j);
          EXPECT_NEAR(c.at(n, i, j), s, 1e-12);
        }
  }
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  std::vector<NamedTensor> inputs{{"a", &a}, {"b", &b}};
  auto result = finite_difference_check(
      [&](Tape& tape) { return reduce(tape, batched_matmul(tape.leaf(a), tape.leaf(b)), 8); }, inputs);
  EXPECT_LT(result.max_rel_error, 1e-6);
}

TEST(Transpose, SwapsLastTwoAxes) {
  Tape tape;
  Var t = transpose(tape.constant(Tensor::matrix({{1, 2, 3}, {4, 5, 6}})));
  EXPECT_EQ(t.shape(), (Shape{3, 2}));
  EXPECT_EQ(t.value().storage(), (std::vector<double>{1, 4, 2, 5, 3, 6}));
  auto result = finite_difference_check(
      [](Tape& tape, const Var& x) { return reduce(tape, transpose(x), 9); }, random_tensor({2, 3, 4}, 10));
  EXPECT_LT(result.max_rel_error, 1e-6);
}

TEST(MaskedSoftmax, UniformRow) {
  Tape tape;
  Var out = masked_softmax(tape.constant(Tensor::vector({0, 0, 0})), Tensor::vector({0, 0, 0}));
  expect_tensor_near(out.value(), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-15);
}

TEST(MaskedSoftmax, SingleUnmaskedEntry) {
  Tape tape;
  Var out = masked_softmax(tape.constant(Tensor::vector({5, 5})), Tensor::vector({0, kNegInf}));
  EXPECT_EQ(out.value()[0], 1.0);
  EXPECT_EQ(out.value()[1], 0.0);
}

TEST(MaskedSoftmax, DirectEvaluation) {
  Tape tape;
  Var out = masked_softmax(tape.constant(Tensor::vector({1, 2, 3})), Tensor::vector({0, 0, 0}));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  expect_tensor_near(out.value(), {std::exp(1.0) / z, std::exp(2.0) / z, std::exp(3.0) / z}, 1e-15);
  expect_tensor_near(out.value(), {0.09003, 0.24473, 0.66524}, 5e-6);
}

TEST(MaskedSoftmax, FullyMaskedRowIsAnError) {
  Tape tape;
  EXPECT_THROW(masked_softmax(tape.constant(Tensor::matrix({{1, 2}, {3, 4}})),
                              Tensor::matrix({{0, kNegInf}, {kNegInf, kNegInf}})),
               DomainError);
}

TEST(MaskedSoftmax, RowsSumToOneAndMaskedEntriesAreZero) {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution keep(0.6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + trial % 7, cols = 1 + (trial * 5) % 11;
    Tensor logits = random_tensor({rows, cols}, 100 + trial, -30.0, 30.0);
    Tensor mask(Shape{rows, cols}, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) mask.at(r, c) = keep(rng) ? 0.0 : kNegInf;
      mask.at(r, (r * 3) % cols) = 0.0;
    }
    Tape tape;
    const Tensor& out = masked_softmax(tape.constant(logits), mask).value();
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        if (mask.at(r, c) == kNegInf) EXPECT_EQ(out.at(r, c), 0.0);
        s += out.at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(MaskedSoftmax, GradientSkipsMaskedCoordinates) {
  const Tensor mask = Tensor::matrix({{0, kNegInf, 0}, {0, 0, kNegInf}});
  Tensor x = random_tensor({2, 3}, 12);
  auto result = finite_difference_check(
      [&](Tape& tape, const Var& v) { return reduce(tape, masked_softmax(v, mask), 13); }, x);
  EXPECT_LT(result.max_rel_error, 1e-6);

  // -inf inputs themselves are never perturbed.
  Tensor with_inf = Tensor::vector({0.3, kNegInf, -0.2});
  auto skipped = finite_difference_check(
      [&](Tape& tape, const Var& v) {
        Var e = exp(v);
        return sum(e);
      },
      with_inf);
  EXPECT_EQ(skipped.coordinates, 2u);
  EXPECT_LT(skipped.max_rel_error, 1e-6);
}

TEST(CausalConv1d, RunningSumExample) {
  Tape tape;
  Var out = causal_conv1d(tape.constant(Tensor::matrix({{1}, {2}, {3}})), tape.constant(Tensor(Shape{2, 1, 1}, 1.0)),
                          tape.constant(Tensor(Shape{1}, 0.0)));
  EXPECT_EQ(out.value().storage(), (std::vector<double>{1, 3, 5}));
}

TEST(CausalConv1d, KernelOneIdentityIsIdentity) {
  const Tensor x = random_tensor({4, 3}, 14);
  Tensor kernel(Shape{1, 3, 3}, 0.0);
  for (std::size_t i = 0; i < 3; ++i) kernel.at(0, i, i) = 1.0;
  Tape tape;
  Var out = causal_conv1d(tape.constant(x), tape.constant(kernel), tape.constant(Tensor(Shape{3}, 0.0)));
  EXPECT_EQ(out.value().storage(), x.storage());
}

TEST(CausalConv1d, KernelLongerThanSequenceIsPurePadding) {
  const Tensor x = Tensor::matrix({{2}, {5}});
  Tensor kernel(Shape{4, 1, 1});
  kernel[0] = 100.0;
  kernel[1] = 10.0;
  kernel[2] = 3.0;  // multiplies row t-1
  kernel[3] = 1.0;  // multiplies row t
  Tape tape;
  Var out = causal_conv1d(tape.constant(x), tape.constant(kernel), tape.constant(Tensor(Shape{1}, 0.5)));
  EXPECT_EQ(out.value().storage(), (std::vector<double>{2.5, 3 * 2 + 5 + 0.5}));
}

TEST(CausalConv1d, OutputRowIgnoresLaterInputsBitwise) {
  const Tensor kernel = random_tensor({3, 4, 5}, 15), bias = random_tensor({5}, 16);
  const Tensor x = random_tensor({6, 4}, 17);
  Tape base_tape;
  const Tensor base = causal_conv1d(base_tape.constant(x), base_tape.constant(kernel), base_tape.constant(bias)).value();
  for (std::size_t t = 0; t < 6; ++t) {
    Tensor changed = x;
    for (std::size_t r = t + 1; r < 6; ++r)
      for (std::size_t c = 0; c < 4; ++c) changed.at(r, c) = 1e3 * static_cast<double>(r + c + 1);
    Tape tape;
    const Tensor& out = causal_conv1d(tape.constant(changed), tape.constant(kernel), tape.constant(bias)).value();
    for (std::size_t r = 0; r <= t; ++r)
      for (std::size_t f = 0; f < 5; ++f) EXPECT_EQ(out.at(r, f), base.at(r, f)) << "row " << r << " cut " << t;
  }
}

TEST(CausalConv1d, BatchEqualsIndependentSequences) {
  const Tensor kernel = random_tensor({2, 3, 2}, 18), bias = random_tensor({2}, 19);
  const Tensor batch = random_tensor({4, 5, 3}, 20);
  Tape tape;
  const Tensor out = causal_conv1d(tape.constant(batch), tape.constant(kernel), tape.constant(bias)).value();
  for (std::size_t b = 0; b < 4; ++b) {
    Tensor single(Shape{5, 3});
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < 3; ++c) single.at(t, c) = batch.at(b, t, c);
    Tape t2;
    const Tensor& one = causal_conv1d(t2.constant(single), t2.constant(kernel), t2.constant(bias)).value();
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t f = 0; f < 2; ++f) EXPECT_NEAR(out.at(b, t, f), one.at(t, f), 1e-14);
  }
}

TEST(CausalConv1d, GradientMatchesFiniteDifferences) {
  Tensor x = random_tensor({3, 5, 4}, 21), kernel = random_tensor({3, 4, 3}, 22), bias = random_tensor({3}, 23);
  for (Tensor* t : {&x, &kernel, &bias}) t->set_requires_grad(true);
  std::vector<NamedTensor> inputs{{"x", &x}, {"kernel", &kernel}, {"bias", &bias}};
  auto result = finite_difference_check(
      [&](Tape& tape) { return reduce(tape, causal_conv1d(tape.leaf(x), tape.leaf(kernel), tape.leaf(bias)), 24); },
      inputs);
  EXPECT_LT(result.max_rel_error, 1e-6);
}

TEST(CausalConv1d, RejectsMismatchedChannels) {
  Tape tape;
  EXPECT_THROW(causal_conv1d(tape.constant(Tensor(Shape{3, 2})), tape.constant(Tensor(Shape{2, 3, 1})),
                             tape.constant(Tensor(Shape{1}))),
               DimensionError);
}

TEST(Elementwise, AnalyticValues) {
  Tape tape;
  EXPECT_EQ(sigmoid(tape.constant(Tensor::scalar(0.0))).value().item(), 0.5);
  EXPECT_DOUBLE_EQ(leaky_relu(tape.constant(Tensor::scalar(-1.0)), 0.2).value().item(), -0.2);
  EXPECT_EQ(leaky_relu(tape.constant(Tensor::scalar(3.0)), 0.2).value().item(), 3.0);
  EXPECT_DOUBLE_EQ(elu(tape.constant(Tensor::scalar(-1.0))).value().item(), std::exp(-1.0) - 1.0);
  EXPECT_EQ(clamp_min(tape.constant(Tensor::vector({-1.0, 2.0})), 0.5).value().storage(),
            (std::vector<double>{0.5, 2.0}));
  EXPECT_EQ(scale(tape.constant(Tensor::vector({1.0, -2.0})), 3.0).value().storage(), (std::vector<double>{3.0, -6.0}));
}

TEST(Elementwise, EluGradientAtPointThree) {
  auto result = finite_difference_check([](Tape&, const Var& x) { return sum(elu(x)); }, Tensor::scalar(0.3));
  EXPECT_LT(result.max_rel_error, 1e-6);
}

TEST(Elementwise, LogOfNonPositiveIsDomainError) {
  Tape tape;
  EXPECT_THROW(log(tape.constant(Tensor::vector({1.0, 0.0}))), DomainError);
  EXPECT_THROW(log(tape.constant(Tensor::vector({-1.0}))), DomainError);
}

TEST(Elementwise, EveryKindPassesFiniteDifferences) {
  const std::vector<std::pair<UnaryKind, double>> kinds{
      {UnaryKind::LeakyRelu, 0.2}, {UnaryKind::Elu, 0.0},    {UnaryKind::Sigmoid, 0.0}, {UnaryKind::Exp, 0.0},
      {UnaryKind::Negate, 0.0},    {UnaryKind::Scale, -1.7}, {UnaryKind::ClampMin, -0.5}};
  for (const auto& [kind, param] : kinds) {
    auto result = finite_difference_check(
        [&](Tape& tape, const Var& x) { return reduce(tape, elementwise(x, kind, param), 25); },
        random_tensor({4, 3}, 26));
    EXPECT_LT(result.max_rel_error, 1e-6) << static_cast<int>(kind);
  }
  auto log_result = finite_difference_check(
      [](Tape& tape, const Var& x) { return reduce(tape, log(x), 27); }, random_tensor({5}, 28, 0.5, 2.0));
  EXPECT_LT(log_result.max_rel_error, 1e-6);

  for (auto kind : {BinaryKind::Add, BinaryKind::Subtract, BinaryKind::Multiply}) {
    Tensor a = random_tensor({3, 2}, 29), b = random_tensor({3, 2}, 30);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    std::vector<NamedTensor> inputs{{"a", &a}, {"b", &b}};
    auto result = finite_difference_check(
        [&](Tape& tape) { return reduce(tape, elementwise(tape.leaf(a), tape.leaf(b), kind), 31); }, inputs);
    EXPECT_LT(result.max_rel_error, 1e-6) << static_cast<int>(kind);
  }
}

TEST(Elementwise, BinaryRequiresEqualShapes) {
  Tape tape;
  EXPECT_THROW(add(tape.constant(Tensor(Shape{2})), tape.constant(Tensor(Shape{3}))), DimensionError);
}

TEST(Concat, SinglePart) {
  Tape tape;
  EXPECT_EQ(concat({tape.constant(Tensor::vector({1, 2}))}, 0).value().storage(), (std::vector<double>{1, 2}));
}

TEST(Concat, ColumnsExample) {
  Tape tape;
  Var out = concat({tape.constant(Tensor::matrix({{1}, {2}})), tape.constant(Tensor::matrix({{3}, {4}}))}, 1);
  EXPECT_EQ(out.shape(), (Shape{2, 2}));
  EXPECT_EQ(out.value().storage(), (std::vector<double>{1, 3, 2, 4}));
}

TEST(Concat, EmptySequenceIsAnError) {
  EXPECT_THROW(concat({}, 0), DimensionError);
}

TEST(Concat, GradientOfSumIsOnes) {
  Tensor a = random_tensor({2, 3}, 32), b = random_tensor({2, 1}, 33);
  a.set_requires_grad(true);
  Tape tape;
  tape.backward(sum(concat({tape.leaf(a), tape.leaf(b)}, 1)));
  for (double g : a.grad()) EXPECT_EQ(g, 1.0);
  EXPECT_FALSE(b.has_grad());
}

TEST(ShapeOps, GradientsMatchFiniteDifferences) {
  const std::vector<std::size_t> idx{2, 0, 2, 1};
  auto check = [](const std::function<Var(Tape&, const Var&)>& f, Tensor x) {
    return finite_difference_check(f, x).max_rel_error;
  };
  EXPECT_LT(check([](Tape& t, const Var& x) { return reduce(t, slice(x, 1, 1, 2), 34); }, random_tensor({3, 4, 2}, 35)),
            1e-6);
  EXPECT_LT(check([](Tape& t, const Var& x) { return reduce(t, reshape(x, {6, 2}), 36); }, random_tensor({3, 4}, 37)),
            1e-6);
  EXPECT_LT(check([](Tape& t, const Var& x) { return reduce(t, row_sum(x), 38); }, random_tensor({3, 4}, 39)), 1e-6);
  EXPECT_LT(check([](Tape& t, const Var& x) { return reduce(t, repeat(x, 3), 40); }, random_tensor({2, 2}, 41)), 1e-6);
  EXPECT_LT(check([&](Tape& t, const Var& x) { return reduce(t, gather_rows(x, idx), 42); }, random_tensor({3, 2}, 43)),
            1e-6);
  EXPECT_LT(check([](Tape& t, const Var& x) { return reduce(t, pairwise_sum(x, scale(x, 2.0)), 44); },
                  random_tensor({4}, 45)),
            1e-6);
}

TEST(ShapeOps, ForwardValues) {
  Tape tape;
  Var x = tape.constant(Tensor::matrix({{1, 2, 3}, {4, 5, 6}}));
  EXPECT_EQ(slice(x, 1, 1, 2).value().storage(), (std::vector<double>{2, 3, 5, 6}));
  EXPECT_EQ(row_sum(x).value().storage(), (std::vector<double>{6, 15}));
  const std::vector<std::size_t> idx{1, 1, 0};
  EXPECT_EQ(gather_rows(x, idx).value().storage(), (std::vector<double>{4, 5, 6, 4, 5, 6, 1, 2, 3}));
  Var ps = pairwise_sum(tape.constant(Tensor::vector({1, 2})), tape.constant(Tensor::vector({10, 20, 30})));
  EXPECT_EQ(ps.value().storage(), (std::vector<double>{11, 21, 31, 12, 22, 32}));
  EXPECT_THROW(slice(x, 1, 2, 2), DimensionError);
  EXPECT_THROW(reshape(x, {4}), DimensionError);
}

TEST(Backward, SumGivesOnes) {
  Tensor x = random_tensor({2, 3}, 46);
  x.set_requires_grad(true);
  Tape tape;
  tape.backward(sum(tape.leaf(x)));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareGivesTwiceX) {
  Tensor x = Tensor::vector({1, 2});
  x.set_requires_grad(true);
  Tape tape;
  Var v = tape.leaf(x);
  tape.backward(sum(multiply(v, v)));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, 4}));
}

TEST(Backward, SecondCallWithoutResetThrowsAndResetIsBitwiseRepeatable) {
  Tensor x = random_tensor({4, 3}, 47), w = random_tensor({3, 2}, 48);
  x.set_requires_grad(true);
  w.set_requires_grad(true);
  Tape tape;
  Var loss = sum(sigmoid(matmul(tape.leaf(x), tape.leaf(w))));
  tape.backward(loss);
  const std::vector<double> first(w.grad().begin(), w.grad().end());
  EXPECT_THROW(tape.backward(loss), Error);
  tape.reset_backward();
  w.zero_grad();
  x.zero_grad();
  tape.backward(loss);
  EXPECT_EQ(std::vector<double>(w.grad().begin(), w.grad().end()), first);
}

TEST(Backward, LossFromAnotherTapeIsRejected) {
  Tape a, b;
  Var loss = sum(a.constant(Tensor::vector({1, 2})));
  EXPECT_THROW(b.backward(loss), Error);
}

TEST(Backward, NonScalarLossIsRejected) {
  Tensor x = Tensor::vector({1, 2});
  x.set_requires_grad(true);
  Tape tape;
  EXPECT_THROW(tape.backward(tape.leaf(x)), DimensionError);
}

TEST(FiniteDifference, LinearIsExact) {
  auto result = finite_difference_check([](Tape&, const Var& x) { return sum(x); }, random_tensor({7}, 49));
  EXPECT_LT(result.max_rel_error, 1e-10);
}

TEST(FiniteDifference, SigmoidSum) {
  auto result = finite_difference_check([](Tape&, const Var& x) { return sum(sigmoid(x)); }, random_tensor({10}, 50));
  EXPECT_LT(result.max_rel_error, 1e-7);
}

TEST(FiniteDifference, DetectsCorruptedBackwardRule) {
  FaultGuard guard;
  convdysat::testing::inject_backward_fault("matmul", 1.5);
  Tensor a = random_tensor({3, 4}, 51), b = random_tensor({4, 2}, 52);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  std::vector<NamedTensor> inputs{{"a", &a}, {"b", &b}};
  auto result = finite_difference_check(
      [&](Tape& tape) { return reduce(tape, matmul(tape.leaf(a), tape.leaf(b)), 53); }, inputs);
  EXPECT_GT(result.max_rel_error, 1e-3);
}

TEST(Parallel, KernelsAreIndependentOfThreadCount) {
  ThreadGuard guard;
  const Tensor a = random_tensor({6, 40, 30}, 54), b = random_tensor({6, 30, 20}, 55);
  const Tensor x = random_tensor({8, 9, 30}, 56), k = random_tensor({2, 30, 7}, 57), bias = random_tensor({7}, 58);
  auto run = [&] {
    Tape tape;
    std::vector<double> out = batched_matmul(tape.constant(a), tape.constant(b)).value().storage();
    const auto& conv = causal_conv1d(tape.constant(x), tape.constant(k), tape.constant(bias)).value().storage();
    out.insert(out.end(), conv.begin(), conv.end());
    return out;
  };
  set_num_threads(1);
  const auto serial = run();
  set_num_threads(4);
  EXPECT_EQ(run(), serial);
}

TEST(Parallel, ParallelForCoversRangeOnce) {
  ThreadGuard guard;
  set_num_threads(4);
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 1000000, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) ++hits[i];
  });
  for (int h : hits) EXPECT_EQ(h, 1);
}
