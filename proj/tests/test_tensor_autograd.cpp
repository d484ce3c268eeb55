#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fusenet/ops.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace fusenet;
using fusenet::testing::check_op_gradient;
using fusenet::testing::random_tensor;

namespace {

Tensor<double> run_unary(const Tensor<double>& x, const std::function<Var(Graph<double>&, Var)>& op) {
  Graph<double> g;
  return g.value(op(g, g.constant(x)));
}

}  // namespace

TEST(Conv2d, OnesKernelSumsWindow) {
  Graph<double> g;
  Var y = conv2d(g, g.constant(Tensor<double>({1, 1, 3, 3}, 1.0)), g.constant(Tensor<double>({1, 1, 3, 3}, 1.0)),
                 g.constant(Tensor<double>({1}, 0.0)), {1, 0});
  ASSERT_EQ(g.value(y).shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(g.value(y)[0], 9.0);
}

TEST(Conv2d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(1);
  auto x = random_tensor<double>({2, 1, 5, 4}, rng);
  Graph<double> g;
  Var y = conv2d(g, g.constant(x), g.constant(Tensor<double>({1, 1, 1, 1}, 1.0)), g.constant(Tensor<double>({1}, 0.0)),
                 {1, 0});
  EXPECT_EQ(g.value(y), x);
}

TEST(Conv2d, MatchesNaiveLoopStrideTwoPadOne) {
  std::mt19937_64 rng(7);
  auto x = random_tensor<double>({2, 3, 7, 7}, rng);
  auto w = random_tensor<double>({4, 3, 3, 3}, rng);
  auto b = random_tensor<double>({4}, rng);
  Graph<double> g;
  Var y = conv2d(g, g.constant(x), g.constant(w), g.constant(b), {2, 1});
  auto expected = fusenet::testing::naive_conv2d(x, w, b, 2, 1);
  ASSERT_EQ(g.value(y).shape(), expected.shape());
  EXPECT_LE(fusenet::testing::max_abs_diff(g.value(y), expected), 1e-6);
}

TEST(Conv2d, ChannelMismatchNamesAxis) {
  Graph<double> g;
  try {
    conv2d(g, g.constant(Tensor<double>({1, 2, 4, 4})), g.constant(Tensor<double>({1, 3, 3, 3})),
           g.constant(Tensor<double>({1})), {1, 0});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.axis(), "C");
  }
  EXPECT_THROW(conv2d(g, g.constant(Tensor<double>({1, 1, 2, 2})), g.constant(Tensor<double>({1, 1, 3, 3})),
                      g.constant(Tensor<double>({1})), {1, 0}),
               DimensionError);
}

TEST(Conv2d, NonFiniteInputIsNumericError) {
  Graph<double> g;
  Tensor<double> x({1, 1, 2, 2}, 1.0);
  x[1] = NAN;
  EXPECT_THROW(g.constant(x), NumericError);
}

TEST(MaxPool, PicksWindowMaximum) {
  auto y = run_unary(Tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4}), [](auto& g, Var x) { return maxpool2d(g, x, 2, 2); });
  EXPECT_EQ(y, Tensor<double>({1, 1, 1, 1}, {4.0}));
}

TEST(MaxPool, ConstantInputRoutesGradientToFirstElement) {
  Graph<double> g;
  Var x = g.variable(Tensor<double>({1, 1, 2, 2}, 3.0));
  Var y = maxpool2d(g, x, 2, 2);
  EXPECT_EQ(g.value(y)[0], 3.0);
  g.backward(sum(g, y));
  EXPECT_EQ(g.grad(x), Tensor<double>({1, 1, 2, 2}, {1, 0, 0, 0}));
}

TEST(MaxPool, MatchesNaiveLoop) {
  std::mt19937_64 rng(3);
  auto x = random_tensor<double>({1, 2, 8, 8}, rng);
  auto y = run_unary(x, [](auto& g, Var v) { return maxpool2d(g, v, 3, 2); });
  EXPECT_EQ(y, fusenet::testing::naive_maxpool(x, 3, 2));
}

TEST(MaxPool, WindowLargerThanInputThrows) {
  EXPECT_THROW(run_unary(Tensor<double>({1, 1, 2, 5}), [](auto& g, Var v) { return maxpool2d(g, v, 3, 1); }),
               DimensionError);
}

TEST(Relu, ClampsNegativesAndZero) {
  Graph<double> g;
  Var x = g.variable(Tensor<double>({3}, {-1, 0, 2}));
  Var y = relu(g, x);
  EXPECT_EQ(g.value(y), Tensor<double>({3}, {0, 0, 2}));
  g.backward(sum(g, y));
  EXPECT_EQ(g.grad(x), Tensor<double>({3}, {0, 0, 1}));
}

TEST(Relu, PositiveInputIsIdentity) {
  Tensor<double> x({4}, {0.1, 1, 2, 3});
  EXPECT_EQ(run_unary(x, [](auto& g, Var v) { return relu(g, v); }), x);
}

TEST(Lrn, ZeroInputStaysZero) {
  Tensor<double> x({1, 4, 2, 2});
  EXPECT_EQ(run_unary(x, [](auto& g, Var v) { return lrn(g, v, LrnParams{}); }), x);
}

TEST(Lrn, CollapsedFormula) {
  auto y = run_unary(Tensor<double>({1, 1, 1, 1}, {2.0}),
                     [](auto& g, Var v) { return lrn(g, v, LrnParams{1, 0.0, 1.0, 1.0}); });
  EXPECT_DOUBLE_EQ(y[0], 0.5);
}

TEST(Lrn, MatchesDirectFormula) {
  std::mt19937_64 rng(11);
  auto x = random_tensor<double>({1, 8, 4, 4}, rng, -3, 3);
  LrnParams p{5, 2.0, 1e-4, 0.75};
  auto y = run_unary(x, [&](auto& g, Var v) { return lrn(g, v, p); });
  EXPECT_LE(fusenet::testing::max_abs_diff(y, fusenet::testing::direct_lrn(x, 5, 2.0, 1e-4, 0.75)), 1e-6);
}

TEST(Lrn, RejectsEvenWindow) {
  EXPECT_THROW(LrnParams({4, 2, 1e-4, 0.75}).validate(), ConfigError);
}

TEST(FullyConnected, IdentityWeight) {
  Graph<double> g;
  Tensor<double> x({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Var y = fully_connected(g, g.constant(x), g.constant(eye), g.constant(Tensor<double>({3})));
  EXPECT_EQ(g.value(y), x);
}

TEST(FullyConnected, SmallProduct) {
  Graph<double> g;
  Var y = fully_connected(g, g.constant(Tensor<double>({1, 2}, {1, 2})), g.constant(Tensor<double>({1, 2}, {3, 4})),
                          g.constant(Tensor<double>({1}, {5})));
  EXPECT_EQ(g.value(y), Tensor<double>({1, 1}, {16.0}));
}

TEST(FullyConnected, InnerDimensionMismatch) {
  Graph<double> g;
  EXPECT_THROW(fully_connected(g, g.constant(Tensor<double>({1, 2})), g.constant(Tensor<double>({1, 3})),
                               g.constant(Tensor<double>({1}))),
               DimensionError);
}

TEST(Softmax, UniformOnZeros) {
  auto y = run_unary(Tensor<double>({1, 4}), [](auto& g, Var v) { return softmax(g, v); });
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, ShiftInvariant) {
  std::mt19937_64 rng(5);
  auto x = random_tensor<double>({3, 5}, rng, -4, 4);
  auto shifted = x;
  for (auto& v : shifted.data()) v += 17.5;
  auto a = run_unary(x, [](auto& g, Var v) { return softmax(g, v); });
  auto b = run_unary(shifted, [](auto& g, Var v) { return softmax(g, v); });
  EXPECT_LE(fusenet::testing::max_abs_diff(a, b), 1e-7);
  for (std::size_t r = 0; r < 3; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 5; ++c) total += a[r * 5 + c];
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  auto y = run_unary(Tensor<double>({1, 2}, {1000, 0}), [](auto& g, Var v) { return softmax(g, v); });
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_LT(y[1], 1e-300);
}

TEST(CrossEntropy, ConfidentCorrectIsNearZero) {
  Graph<double> g;
  std::vector<std::size_t> labels{1};
  Var l = cross_entropy_loss(g, g.constant(Tensor<double>({1, 3}, {0, 500, 0})), labels);
  EXPECT_NEAR(g.value(l)[0], 0.0, 1e-12);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  Graph<double> g;
  std::vector<std::size_t> labels{2, 0};
  Var l = cross_entropy_loss(g, g.constant(Tensor<double>({2, 4})), labels);
  EXPECT_NEAR(g.value(l)[0], std::log(4.0), 1e-12);
}

TEST(CrossEntropy, LabelOutOfRange) {
  Graph<double> g;
  std::vector<std::size_t> labels{4};
  EXPECT_THROW(cross_entropy_loss(g, g.constant(Tensor<double>({1, 4})), labels), ConfigError);
}

TEST(Concat, WidthAxisMergesImages) {
  Graph<double> g;
  Var y = concat(g, g.constant(Tensor<double>({1, 3, 227, 227})), g.constant(Tensor<double>({1, 3, 227, 227})), 3);
  EXPECT_EQ(g.value(y).shape(), (Shape{1, 3, 227, 454}));
}

TEST(Concat, EmptyOperandIsIdentity) {
  std::mt19937_64 rng(2);
  auto x = random_tensor<double>({2, 3, 4}, rng);
  Graph<double> g;
  Var y = concat(g, g.constant(x), g.constant(Tensor<double>({2, 3, 0})), 2);
  EXPECT_EQ(g.value(y), x);
}

TEST(Concat, NonAxisMismatch) {
  Graph<double> g;
  EXPECT_THROW(concat(g, g.constant(Tensor<double>({2, 3})), g.constant(Tensor<double>({3, 3})), 1), DimensionError);
}

TEST(Concat, SliceAtSeamRoundTripsProperty) {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    Shape sa{dim(rng), dim(rng), dim(rng)};
    const std::size_t axis = trial % 3;
    Shape sb = sa;
    sb[axis] = dim(rng);
    auto a = random_tensor<double>(sa, rng);
    auto b = random_tensor<double>(sb, rng);
    Graph<double> g;
    const auto& y = g.value(concat(g, g.constant(a), g.constant(b), axis));
    EXPECT_EQ(slice(y, axis, 0, sa[axis]), a);
    EXPECT_EQ(slice(y, axis, sa[axis], sa[axis] + sb[axis]), b);
  }
}

TEST(Elementwise, AddAndMulIdentities) {
  Graph<double> g;
  Tensor<double> s({1, 4}, {0.3, -2, 1.7, 0.9});
  EXPECT_EQ(g.value(add(g, g.constant(Tensor<double>({2}, {1, 2})), g.constant(Tensor<double>({2}, {3, 4})))),
            Tensor<double>({2}, {4, 6}));
  EXPECT_EQ(g.value(mul(g, g.constant(s), g.constant(Tensor<double>({1, 4}, 1.0)))), s);
  EXPECT_EQ(g.value(add(g, g.constant(s), g.constant(Tensor<double>({1, 4})))), s);
  EXPECT_THROW(add(g, g.constant(Tensor<double>({2})), g.constant(Tensor<double>({3}))), DimensionError);
}

TEST(Elementwise, ArgmaxInvariantUnderUniformShiftProperty) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> shift(-10, 10);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_tensor<double>({1, 6}, rng, -5, 5);
    Graph<double> g;
    Var y = add(g, g.constant(s), g.constant(Tensor<double>({1, 6}, shift(rng))));
    EXPECT_EQ(argmax_rows(g.value(y)), argmax_rows(s));
  }
}

TEST(Backward, SumGivesOnes) {
  Graph<double> g;
  Var x = g.variable(Tensor<double>({2, 3}, 0.5));
  g.backward(sum(g, x));
  EXPECT_EQ(g.grad(x), Tensor<double>({2, 3}, 1.0));
}

TEST(Backward, UnreachableParameterKeepsZeroGradient) {
  ParameterStore<double> params;
  params.add("used", Tensor<double>({2}, 1.0));
  params.add("unused", Tensor<double>({2}, 1.0));
  Graph<double> g(&params);
  Var used = g.parameter("used");
  g.parameter("unused");
  g.backward(sum(g, used));
  EXPECT_EQ(params.get("used").grad, Tensor<double>({2}, 1.0));
  EXPECT_EQ(params.get("unused").grad, Tensor<double>({2}, 0.0));
  EXPECT_FALSE(params.get("unused").grad_ready);
}

TEST(Backward, NonScalarLossRejected) {
  Graph<double> g;
  Var x = g.variable(Tensor<double>({2}, 1.0));
  EXPECT_THROW(g.backward(x), DimensionError);
}

TEST(Backward, RepeatableBitForBit) {
  std::mt19937_64 rng(31);
  auto x = random_tensor<float>({2, 3, 6, 6}, rng);
  auto w = random_tensor<float>({4, 3, 3, 3}, rng);
  auto run = [&] {
    Graph<float> g;
    Var xv = g.variable(x);
    Var wv = g.variable(w);
    Var y = lrn(g, relu(g, conv2d(g, xv, wv, g.constant(Tensor<float>({4})), {1, 1})), LrnParams{});
    g.backward(sum(g, maxpool2d(g, y, 2, 2)));
    return std::make_pair(g.grad(xv), g.grad(wv));
  };
  EXPECT_EQ(run(), run());
}

TEST(Sgd, PlainStep) {
  ParameterStore<double> params;
  auto& p = params.add("p", Tensor<double>({1}, {1.0}));
  p.grad[0] = 2.0;
  p.grad_ready = true;
  sgd_step(params, SgdOptions{0.1});
  EXPECT_DOUBLE_EQ(p.value[0], 0.8);
  EXPECT_EQ(p.grad[0], 0.0);
}

TEST(Sgd, ZeroRateAndFrozenAreBitIdentical) {
  std::mt19937_64 rng(4);
  ParameterStore<float> params;
  params.add("a", random_tensor<float>({3, 3}, rng));
  params.add("b", random_tensor<float>({5}, rng));
  for (auto& p : params) {
    p.grad = random_tensor<float>(p.value.shape(), rng);
    p.grad_ready = true;
  }
  const auto before_a = params.get("a").value;
  sgd_step(params, SgdOptions{0.0});
  EXPECT_EQ(params.get("a").value, before_a);

  params.get("b").lr_mult = 0.0f;
  const auto before_b = params.get("b").value;
  params.get("a").grad.fill(1.0f);
  params.get("a").grad_ready = true;
  sgd_step(params, SgdOptions{0.5});
  EXPECT_EQ(content_hash(params.get("b").value), content_hash(before_b));
  EXPECT_NE(params.get("a").value, before_a);
}

TEST(Sgd, MissingGradientOnTrainableThrows) {
  ParameterStore<double> params;
  params.add("p", Tensor<double>({1}, 1.0));
  EXPECT_THROW(sgd_step(params, SgdOptions{0.1}), Error);
}

// Finite-difference checks, 64-bit, 50 random coordinates per op.

class OpGradient : public ::testing::Test {
 protected:
  std::mt19937_64 rng{2024};
  static constexpr std::size_t kPoints = 50;
  static constexpr double kTolerance = 1e-3;
};

TEST_F(OpGradient, Conv2d) {
  auto r = check_op_gradient({random_tensor<double>({2, 3, 6, 5}, rng), random_tensor<double>({4, 3, 3, 3}, rng),
                              random_tensor<double>({4}, rng)},
                             [](auto& g, const auto& v) { return conv2d(g, v[0], v[1], v[2], {2, 1}); }, rng, kPoints);
  EXPECT_LE(r.max_relative_error, kTolerance);
}

TEST_F(OpGradient, MaxPool) {
  auto r = check_op_gradient({random_tensor<double>({2, 2, 7, 7}, rng)},
                             [](auto& g, const auto& v) { return maxpool2d(g, v[0], 3, 2); }, rng, kPoints);
  EXPECT_LE(r.max_relative_error, kTolerance);
}

TEST_F(OpGradient, Relu) {
  auto x = random_tensor<double>({4, 8}, rng);
  for (auto& v : x.data()) v += v >= 0 ? 0.05 : -0.05;
  auto r = check_op_gradient({x}, [](auto& g, const auto& v) { return relu(g, v[0]); }, rng, kPoints);
  EXPECT_LE(r.max_relative_error, kTolerance);
}

TEST_F(OpGradient, Lrn) {
  // Large alpha so the normalizer contributes measurably to the gradient.
  auto r = check_op_gradient({random_tensor<double>({2, 7, 3, 3}, rng, -2, 2)},
                             [](auto& g, const auto& v) { return lrn(g, v[0], LrnParams{5, 1.0, 0.5, 0.75}); }, rng,
                             kPoints);
  EXPECT_LE(r.max_relative_error, kTolerance);
}

TEST_F(OpGradient, FullyConnected) {
  auto r = check_op_gradient(
      {random_tensor<double>({3, 5}, rng), random_tensor<double>({4, 5}, rng), random_tensor<double>({4}, rng)},
      [](auto& g, const auto& v) { return fully_connected(g, v[0], v[1], v[2]); }, rng, kPoints);
  EXPECT_LE(r.max_relative_error, kTolerance);
}

TEST_F(OpGradient, Softmax) {
  auto r = check_op_gradient({random_tensor<double>({3, 6}, rng, -3, 3)},
                             [](auto& g, const auto& v) { return softmax(g, v[0]); }, rng, kPoints);
  EXPECT_LE(r.max_relative_error, kTolerance);
}

TEST_F(OpGradient, CrossEntropy) {
  std::vector<std::size_t> labels{0, 3, 2};
  auto r = check_op_gradient({random_tensor<double>({3, 4}, rng, -3, 3)},
                             [&](auto& g, const auto& v) { return cross_entropy_loss(g, v[0], labels); }, rng, kPoints);
  EXPECT_LE(r.max_relative_error, kTolerance);
}

TEST_F(OpGradient, NllOfDistribution) {
  std::vector<std::size_t> labels{1, 0};
  auto r = check_op_gradient({random_tensor<double>({2, 3}, rng, -2, 2)},
                             [&](auto& g, const auto& v) { return nll_loss(g, softmax(g, v[0]), labels); }, rng,
                             kPoints);
  EXPECT_LE(r.max_relative_error, kTolerance);
}

TEST_F(OpGradient, ConcatAddMulScale) {
  auto r = check_op_gradient(
      {random_tensor<double>({2, 3, 2}, rng), random_tensor<double>({2, 1, 2}, rng), random_tensor<double>({2, 4, 2}, rng)},
      [](auto& g, const auto& v) {
        Var c = concat(g, v[0], v[1], 1);
        return scale(g, add(g, mul(g, c, v[2]), v[2]), 0.5);
      },
      rng, kPoints);
  EXPECT_LE(r.max_relative_error, kTolerance);
}

TEST_F(OpGradient, Flatten) {
  auto r = check_op_gradient({random_tensor<double>({2, 3, 2, 2}, rng)},
                             [](auto& g, const auto& v) { return flatten(g, v[0]); }, rng, kPoints);
  EXPECT_LE(r.max_relative_error, kTolerance);
}
