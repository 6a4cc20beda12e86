// Forward-value oracles for the differentiable primitives, computed by hand.

#include "perceiver/ops.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using perceiver::Tape;
using perceiver::Tensor;

namespace {

Tape<double>* const kNoTape = nullptr;

template <typename T>
Tensor<T> t2x2(T a, T b, T c, T d) {
  return Tensor<T>::from_values({2, 2}, {a, b, c, d});
}

}  // namespace

TEST(Ops, MatmulHandOracle) {
  auto a = t2x2<double>(1, 2, 3, 4);
  auto b = Tensor<double>::from_values({2, 1}, {5, 6});
  auto c = perceiver::matmul(a, b, kNoTape);
  ASSERT_EQ(c.rows(), 2u);
  ASSERT_EQ(c.cols(), 1u);
  EXPECT_DOUBLE_EQ(17.0, c.at(0, 0));
  EXPECT_DOUBLE_EQ(39.0, c.at(1, 0));
}

TEST(Ops, MatmulTransposedHandOracle) {
  auto a = t2x2<double>(1, 2, 3, 4);
  auto b = Tensor<double>::from_values({1, 2}, {5, 6});  // c = a b^T
  auto c = perceiver::matmul_nt(a, b, kNoTape);
  ASSERT_EQ(c.rows(), 2u);
  ASSERT_EQ(c.cols(), 1u);
  EXPECT_DOUBLE_EQ(17.0, c.at(0, 0));
  EXPECT_DOUBLE_EQ(39.0, c.at(1, 0));
}

TEST(Ops, MatmulShapeMismatchThrows) {
  auto a = t2x2<double>(1, 2, 3, 4);
  auto b = Tensor<double>::from_values({3, 1}, {1, 2, 3});
  EXPECT_THROW(perceiver::matmul(a, b, kNoTape), perceiver::shape_error);
}

TEST(Ops, LinearAppliesWeightAndBias) {
  auto x = Tensor<double>::from_values({1, 2}, {1, 2});
  auto w = t2x2<double>(1, 0, 0, 1);
  auto b = Tensor<double>::from_values({2}, {0.5, -0.5});
  auto y = perceiver::linear(x, w, b, kNoTape);
  EXPECT_DOUBLE_EQ(1.5, y.at(0, 0));
  EXPECT_DOUBLE_EQ(1.5, y.at(0, 1));
}

TEST(Ops, LayerNormHandOracle) {
  auto x = Tensor<double>::from_values({1, 4}, {1, 2, 3, 4});
  auto gain = Tensor<double>::full({1, 4}, 1.0);
  auto bias = Tensor<double>::full({1, 4}, 0.0);
  auto y = perceiver::layer_norm(x, gain, bias, 1e-12, kNoTape);
  const double r = 1.0 / std::sqrt(1.25 + 1e-12);  // var of {1,2,3,4} is 1.25
  EXPECT_NEAR(-1.5 * r, y.at(0, 0), 1e-12);
  EXPECT_NEAR(-0.5 * r, y.at(0, 1), 1e-12);
  EXPECT_NEAR(0.5 * r, y.at(0, 2), 1e-12);
  EXPECT_NEAR(1.5 * r, y.at(0, 3), 1e-12);
}

TEST(Ops, LayerNormNormalizesLargeVarianceRows) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> dist(-100.0, 100.0);
  const std::size_t rows = 4, cols = 64;
  Tensor<double> x({rows, cols});
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = dist(gen);
  auto gain = Tensor<double>::full({1, cols}, 1.0);
  auto bias = Tensor<double>::full({1, cols}, 0.0);
  auto y = perceiver::layer_norm(x, gain, bias, 1e-5, kNoTape);
  for (std::size_t i = 0; i < rows; ++i) {
    double mean = 0, var = 0;
    for (std::size_t j = 0; j < cols; ++j) mean += y.at(i, j);
    mean /= cols;
    for (std::size_t j = 0; j < cols; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
    var /= cols;
    EXPECT_NEAR(0.0, mean, 1e-12);
    EXPECT_NEAR(1.0, var, 1e-6);  // eps shrinks the variance slightly
  }
}

TEST(Ops, LayerNormShiftInvariance) {
  auto x = Tensor<double>::from_values({1, 3}, {0.3, -1.2, 2.5});
  auto shifted = Tensor<double>::from_values({1, 3}, {100.3, 98.8, 102.5});
  auto gain = Tensor<double>::full({1, 3}, 1.0);
  auto bias = Tensor<double>::full({1, 3}, 0.0);
  auto a = perceiver::layer_norm(x, gain, bias, 1e-5, kNoTape);
  auto b = perceiver::layer_norm(shifted, gain, bias, 1e-5, kNoTape);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a.at(0, j), b.at(0, j), 1e-9);
}

TEST(Ops, LayerNormRejectsNonPositiveEps) {
  auto x = Tensor<double>::from_values({1, 2}, {1, 2});
  auto gain = Tensor<double>::full({1, 2}, 1.0);
  auto bias = Tensor<double>::full({1, 2}, 0.0);
  EXPECT_THROW(perceiver::layer_norm(x, gain, bias, 0.0, kNoTape), perceiver::domain_error);
}

TEST(Ops, GeluExactErfValues) {
  auto x = Tensor<double>::from_values({1, 3}, {0.0, 1.0, -1.0});
  auto y = perceiver::gelu(x, kNoTape);
  EXPECT_DOUBLE_EQ(0.0, y.at(0, 0));
  EXPECT_NEAR(0.8413447460685429, y.at(0, 1), 1e-15);   // 1 * Phi(1)
  EXPECT_NEAR(-0.15865525393145705, y.at(0, 2), 1e-15);  // -1 * Phi(-1)
}

TEST(Ops, SoftmaxHandOracle) {
  auto x = Tensor<double>::from_values({1, 2}, {0.0, std::log(3.0)});
  auto y = perceiver::softmax_rows(x, kNoTape);
  EXPECT_NEAR(0.25, y.at(0, 0), 1e-15);
  EXPECT_NEAR(0.75, y.at(0, 1), 1e-15);
}

TEST(Ops, SoftmaxRowsSumToOneUnderExtremeLogits) {
  auto x = Tensor<double>::from_values({2, 3}, {1000.0, 999.0, -1000.0, -5.0, -5.0, -5.0});
  auto y = perceiver::softmax_rows(x, kNoTape);
  for (std::size_t i = 0; i < 2; ++i) {
    double sum = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      sum += y.at(i, j);
      EXPECT_TRUE(std::isfinite(y.at(i, j)));
    }
    EXPECT_NEAR(1.0, sum, 1e-12);
  }
  EXPECT_NEAR(1.0 / 3.0, y.at(1, 0), 1e-15);
}

TEST(Ops, MeanOverIndexHandOracle) {
  auto x = Tensor<double>::from_values({3, 2}, {1, 2, 3, 4, 5, 6});
  auto y = perceiver::mean_over_index(x, kNoTape);
  ASSERT_EQ(y.rows(), 1u);
  EXPECT_DOUBLE_EQ(3.0, y.at(0, 0));
  EXPECT_DOUBLE_EQ(4.0, y.at(0, 1));
}

TEST(Ops, SliceAndConcatRoundTrip) {
  auto x = Tensor<double>::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  auto left = perceiver::slice_cols(x, 0, 1, kNoTape);
  auto right = perceiver::slice_cols(x, 1, 3, kNoTape);
  EXPECT_DOUBLE_EQ(4.0, left.at(1, 0));
  EXPECT_DOUBLE_EQ(6.0, right.at(1, 1));
  const std::vector<Tensor<double>> parts = {left, right};
  auto back = perceiver::concat_cols(parts, kNoTape);
  ASSERT_EQ(back.cols(), 3u);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(x.at(i, j), back.at(i, j));
}

TEST(Ops, BroadcastRows) {
  auto v = Tensor<double>::from_values({1, 2}, {7, 9});
  auto y = perceiver::broadcast_rows(v, 3, kNoTape);
  ASSERT_EQ(y.rows(), 3u);
  EXPECT_DOUBLE_EQ(7.0, y.at(2, 0));
  EXPECT_DOUBLE_EQ(9.0, y.at(2, 1));
}

TEST(Ops, SoftmaxCrossEntropyClosedForms) {
  auto uniform = Tensor<double>::full({1, 4}, 0.0);
  auto l1 = perceiver::softmax_cross_entropy(uniform, 2, kNoTape);
  EXPECT_NEAR(std::log(4.0), l1.at(0, 0), 1e-15);

  auto skewed = Tensor<double>::from_values({1, 2}, {0.0, std::log(3.0)});
  auto l2 = perceiver::softmax_cross_entropy(skewed, 1, kNoTape);
  EXPECT_NEAR(-std::log(0.75), l2.at(0, 0), 1e-15);

  EXPECT_THROW(perceiver::softmax_cross_entropy(uniform, 4, kNoTape),
               perceiver::domain_error);
}

TEST(Ops, SigmoidCrossEntropyClosedForm) {
  auto zeros = Tensor<double>::full({1, 3}, 0.0);
  auto loss = perceiver::sigmoid_cross_entropy(zeros, {0.5, 0.5, 0.5}, kNoTape);
  EXPECT_NEAR(3.0 * std::log(2.0), loss.at(0, 0), 1e-15);

  // Large logits must not overflow: x=500, t=1 -> loss ~ 0
  auto big = Tensor<double>::from_values({1, 1}, {500.0});
  auto l2 = perceiver::sigmoid_cross_entropy(big, {1.0}, kNoTape);
  EXPECT_NEAR(0.0, l2.at(0, 0), 1e-15);
}

TEST(Ops, NonFiniteResultsRaiseNumericError) {
  auto inf = Tensor<double>::from_values({1, 1}, {std::numeric_limits<double>::infinity()});
  EXPECT_THROW(perceiver::gelu(inf, kNoTape), perceiver::numeric_error);
}

TEST(Tape, BackwardRequiresScalarAndSingleUse) {
  auto x = Tensor<double>::from_values({1, 2}, {1, 2}, /*requires_grad=*/true);
  Tape<double> tape;
  auto y = perceiver::mul(x, x, &tape);
  EXPECT_THROW(tape.backward(y), perceiver::state_error);  // y is not scalar

  Tape<double> tape2;
  auto z = perceiver::sum_all(perceiver::mul(x, x, &tape2), &tape2);
  tape2.backward(z);
  ASSERT_TRUE(x.has_grad());
  EXPECT_DOUBLE_EQ(2.0, x.grad()[0]);  // d(sum x^2)/dx = 2x
  EXPECT_DOUBLE_EQ(4.0, x.grad()[1]);
  EXPECT_THROW(tape2.backward(z), perceiver::state_error);  // consumed
}
