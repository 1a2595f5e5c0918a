#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradient_cases.hpp"
#include "oracles.hpp"
#include "shvit/error.hpp"
#include "shvit/ops.hpp"
#include "shvit/rng.hpp"

using namespace shvit;
using oracle::check_gradients;
using oracle::random_leaf;

namespace {

constexpr double kFdTolerance = 1e-4;

Tensor constant(const Shape& shape, std::uint64_t seed) {
  Tensor t = random_leaf(shape, seed);
  return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
}

// Weighted sum so that every output element gets a distinct upstream gradient.
Tensor probe(Graph& g, const Tensor& y, const Tensor& w) { return ops::sum(g, ops::mul(g, y, w)); }

}  // namespace

// ---------------------------------------------------------------------------
// matmul

TEST(Matmul, IdentityLeavesInputUnchanged) {
  Graph g(Graph::Mode::inference);
  const Tensor I = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor X = constant({3, 4}, 11);
  EXPECT_TRUE(bitwise_equal(ops::matmul(g, I, X), X));
  const Tensor A = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor I2 = Tensor::matrix(2, 2, {1, 0, 0, 1});
  EXPECT_TRUE(bitwise_equal(ops::matmul(g, A, I2), A));
}

TEST(Matmul, MatchesTripleLoop) {
  Graph g(Graph::Mode::inference);
  const Tensor a = constant({4, 5}, 12), b = constant({5, 3}, 13);
  const Tensor c = ops::matmul(g, a, b);
  const auto ref = oracle::matmul_loops({a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()}, 4, 5, 3);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-12);
}

TEST(Matmul, MatchesTripleLoopUpTo32) {
  Graph g(Graph::Mode::inference);
  std::mt19937_64 eng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + eng() % 32, k = 1 + eng() % 32, n = 1 + eng() % 32;
    const Tensor a = constant({m, k}, eng()), b = constant({k, n}, eng());
    const Tensor c = ops::matmul(g, a, b);
    const auto ref = oracle::matmul_loops({a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()}, m, k, n);
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(c[i], ref[i], 1e-12);
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Graph g;
  try {
    ops::matmul(g, constant({2, 3}, 1), constant({4, 2}, 2));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, TransposedVariantAgrees) {
  Graph g(Graph::Mode::inference);
  const Tensor a = constant({3, 4}, 15), b = constant({5, 4}, 16);
  const Tensor direct = ops::matmul_nt(g, a, b);
  const Tensor via = ops::matmul(g, a, ops::transpose(g, b));
  EXPECT_LT(max_abs_diff(direct, via), 1e-14);
}

// ---------------------------------------------------------------------------
// softmax

TEST(Softmax, ZerosGiveUniform) {
  Graph g(Graph::Mode::inference);
  const Tensor y = ops::softmax(g, Tensor::vector({0, 0, 0}), 0);
  for (double v : y.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  Graph g(Graph::Mode::inference);
  const Tensor y = ops::softmax(g, Tensor::vector({1000, 0}), 0);
  EXPECT_NEAR(y[0], 1.0, 1e-15);
  EXPECT_NEAR(y[1], 0.0, 1e-15);
}

TEST(Softmax, MatchesExtendedPrecision) {
  Graph g(Graph::Mode::inference);
  std::mt19937_64 eng(17);
  std::uniform_real_distribution<double> u(-20, 20);
  std::vector<double> x(12);
  for (double& v : x) v = u(eng);
  const Tensor y = ops::softmax(g, Tensor::vector(x), 0);
  const auto ref = oracle::softmax_long_double(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], static_cast<double>(ref[i]), 1e-9);
}

TEST(Softmax, RowsSumToOneAlongEitherAxis) {
  Graph g(Graph::Mode::inference);
  Tensor x = constant({4, 6}, 18);
  for (double& v : x.mutable_data()) v *= 1000.0;
  const Tensor r = ops::softmax(g, x, 1);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_GE(r.at(i, j), 0.0);
      s += r.at(i, j);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  const Tensor c = ops::softmax(g, x, 0);
  for (std::size_t j = 0; j < 6; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i) s += c.at(i, j);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Softmax, InvalidAxisThrows) {
  Graph g;
  EXPECT_THROW(ops::softmax(g, constant({2, 2}, 1), 2), ShapeError);
}

// ---------------------------------------------------------------------------
// layer_norm

TEST(LayerNorm, ConstantVectorMapsToZero) {
  Graph g(Graph::Mode::inference);
  const Tensor y = ops::layer_norm(g, Tensor::matrix(1, 4, {5, 5, 5, 5}), Tensor::vector({1, 1, 1, 1}),
                                   Tensor::vector({0, 0, 0, 0}), 1e-6);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, TwoPointStandardization) {
  Graph g(Graph::Mode::inference);
  const Tensor y = ops::layer_norm(g, Tensor::matrix(1, 2, {1, 3}), Tensor::vector({1, 1}), Tensor::vector({0, 0}), 1e-12);
  EXPECT_NEAR(y[0], -1.0, 1e-9);
  EXPECT_NEAR(y[1], 1.0, 1e-9);
}

TEST(LayerNorm, OutputHasZeroMeanUnitVariance) {
  Graph g(Graph::Mode::inference);
  const std::size_t d = 16;
  const Tensor x = constant({5, d}, 19);
  const Tensor y = ops::layer_norm(g, x, Tensor(Shape{d}, 1.0), Tensor(Shape{d}, 0.0), 1e-12);
  for (std::size_t i = 0; i < 5; ++i) {
    double m = 0, v = 0;
    for (std::size_t j = 0; j < d; ++j) m += y.at(i, j);
    m /= d;
    for (std::size_t j = 0; j < d; ++j) v += (y.at(i, j) - m) * (y.at(i, j) - m);
    v /= d;
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-6);
  }
}

TEST(LayerNorm, DimensionMismatchThrows) {
  Graph g;
  EXPECT_THROW(ops::layer_norm(g, constant({2, 3}, 1), Tensor(Shape{4}, 1.0), Tensor(Shape{4}, 0.0), 1e-6),
               ShapeError);
  EXPECT_THROW(ops::layer_norm(g, constant({2, 3}, 1), Tensor(Shape{3}, 1.0), Tensor(Shape{3}, 0.0), 0.0),
               Error);
}

// ---------------------------------------------------------------------------
// gelu

TEST(Gelu, ZeroAndAsymptotes) {
  Graph g(Graph::Mode::inference);
  const Tensor y = ops::gelu(g, Tensor::vector({0.0, 20.0, -20.0}));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 20.0, 1e-12);
  EXPECT_NEAR(y[2], 0.0, 1e-12);
}

TEST(Gelu, UsesTheTanhFormula) {
  Graph g(Graph::Mode::inference);
  const double x = 0.7;
  const double expected = 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
  EXPECT_DOUBLE_EQ(ops::gelu(g, Tensor::vector({x}))[0], expected);
}

TEST(Gelu, GradientMatchesFiniteDifferences) {
  Tensor x = random_leaf({3, 4}, 20, -3, 3);
  const Tensor w = constant({3, 4}, 21);
  const auto r = check_gradients([&](Graph& g) { return probe(g, ops::gelu(g, x), w); }, {{"x", x}});
  EXPECT_LT(r.max_rel_error, 1e-6);
}

// ---------------------------------------------------------------------------
// cross_entropy

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  Graph g(Graph::Mode::inference);
  const std::vector<std::size_t> labels{0, 3};
  const Tensor loss = ops::cross_entropy(g, Tensor(Shape{2, 5}, 0.7), labels);
  EXPECT_NEAR(loss.item(), std::log(5.0), 1e-12);
}

TEST(CrossEntropy, ConfidentCorrectLogitsGiveZeroLoss) {
  Graph g(Graph::Mode::inference);
  const std::vector<std::size_t> labels{1};
  const Tensor loss = ops::cross_entropy(g, Tensor::matrix(1, 3, {0, 800, 0}), labels);
  EXPECT_NEAR(loss.item(), 0.0, 1e-300);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHotOverBatch) {
  Tensor z = random_leaf({3, 5}, 22);
  const std::vector<std::size_t> labels{4, 0, 2};
  Graph g;
  Tensor loss = ops::cross_entropy(g, z, labels);
  g.backward(loss);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> row(z.data().begin() + i * 5, z.data().begin() + i * 5 + 5);
    const auto p = oracle::softmax_long_double(row);
    for (std::size_t j = 0; j < 5; ++j)
      EXPECT_NEAR(z.grad()[i * 5 + j], (static_cast<double>(p[j]) - (j == labels[i] ? 1.0 : 0.0)) / 3.0, 1e-14);
  }
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  Tensor z = random_leaf({3, 5}, 23, -2, 2);
  const std::vector<std::size_t> labels{1, 1, 4};
  const auto r = check_gradients([&](Graph& g) { return ops::cross_entropy(g, z, labels); }, {{"logits", z}});
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(CrossEntropy, OutOfRangeLabelThrows) {
  Graph g;
  const std::vector<std::size_t> labels{5};
  EXPECT_THROW(ops::cross_entropy(g, constant({1, 5}, 1), labels), Error);
}

// ---------------------------------------------------------------------------
// finite-difference sweep over the remaining differentiable ops

class OpGradient : public ::testing::TestWithParam<std::string> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto r = oracle::check_op_gradient(GetParam());
  EXPECT_LT(r.max_rel_error, kFdTolerance) << GetParam() << " worst tensor " << r.worst;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(oracle::op_gradient_cases()),
                         [](const auto& info) { return info.param; });

// ---------------------------------------------------------------------------
// dropout

TEST(Dropout, RateZeroIsIdentityAndDrawsNothing) {
  Graph g;
  Tensor x = random_leaf({2, 3}, 50);
  Rng rng(1), untouched(1);
  const Tensor y = ops::dropout(g, x, 0.0, rng);
  EXPECT_TRUE(y.same_as(x));
  EXPECT_EQ(rng.next_u64(), untouched.next_u64());
}

TEST(Dropout, KeptUnitsAreRescaled) {
  Graph g(Graph::Mode::inference);
  const Tensor x(Shape{1000}, 1.0);
  Rng rng(2);
  const Tensor y = ops::dropout(g, x, 0.25, rng);
  std::size_t kept = 0;
  for (double v : y.data()) {
    if (v != 0.0) {
      EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
      ++kept;
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1000.0, 0.75, 0.05);
}
