// Central finite differences (64-bit) against the recorded adjoints, one
// primitive at a time. Each loss is a weighted sum so upstream gradients are
// non-uniform (a uniform upstream gradient would hide softmax/layer-norm
// adjoint bugs, since both have constant-direction null spaces).

#include "perceiver/ops.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using perceiver::Tape;
using perceiver::Tensor;

namespace {

std::mt19937_64 g_gen(20240613);

Tensor<double> rand_tensor(std::size_t rows, std::size_t cols, bool grad, double lo = -1.0,
                           double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t({rows, cols}, grad);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = dist(g_gen);
  return t;
}

// loss = sum(values * weights), weights fixed, to make upstream grads generic.
Tensor<double> weighted_sum(const Tensor<double>& values, const Tensor<double>& weights,
                            Tape<double>* tape) {
  return perceiver::sum_all(perceiver::mul(values, weights, tape), tape);
}

void expect_grads_match(std::vector<Tensor<double>> inputs,
                        const std::function<Tensor<double>(Tape<double>*)>& make_loss,
                        double tol = 1e-5) {
  Tape<double> tape;
  Tensor<double> loss = make_loss(&tape);
  tape.backward(loss);
  for (Tensor<double>& t : inputs) {
    ASSERT_TRUE(t.has_grad()) << "input did not receive a gradient";
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x0 = t.data()[i];
      const double h = 1e-5 * std::max(1.0, std::abs(x0));
      t.data()[i] = x0 + h;
      const double lp = make_loss(nullptr).data()[0];
      t.data()[i] = x0 - h;
      const double lm = make_loss(nullptr).data()[0];
      t.data()[i] = x0;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = t.grad()[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      EXPECT_LT(std::abs(fd - an) / denom, tol) << "element " << i << ": fd=" << fd
                                                << " analytic=" << an;
    }
  }
}

}  // namespace

TEST(Autograd, Matmul) {
  auto a = rand_tensor(3, 4, true);
  auto b = rand_tensor(4, 2, true);
  auto w = rand_tensor(3, 2, false);
  expect_grads_match({a, b}, [&](Tape<double>* tape) {
    return weighted_sum(perceiver::matmul(a, b, tape), w, tape);
  });
}

TEST(Autograd, MatmulTransposed) {
  auto a = rand_tensor(3, 4, true);
  auto b = rand_tensor(5, 4, true);
  auto w = rand_tensor(3, 5, false);
  expect_grads_match({a, b}, [&](Tape<double>* tape) {
    return weighted_sum(perceiver::matmul_nt(a, b, tape), w, tape);
  });
}

TEST(Autograd, Linear) {
  auto x = rand_tensor(3, 4, true);
  auto wgt = rand_tensor(4, 2, true);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor<double> bias({2}, /*requires_grad=*/true);  // biases are rank-1
  for (std::size_t i = 0; i < bias.size(); ++i) bias.data()[i] = dist(g_gen);
  auto w = rand_tensor(3, 2, false);
  expect_grads_match({x, wgt, bias}, [&](Tape<double>* tape) {
    return weighted_sum(perceiver::linear(x, wgt, bias, tape), w, tape);
  });
}

TEST(Autograd, AddMulScale) {
  auto a = rand_tensor(2, 3, true);
  auto b = rand_tensor(2, 3, true);
  auto w = rand_tensor(2, 3, false);
  expect_grads_match({a, b}, [&](Tape<double>* tape) {
    auto sum = perceiver::add(a, b, tape);
    auto prod = perceiver::mul(sum, b, tape);  // b used twice: accumulation path
    return weighted_sum(perceiver::scale(prod, 0.37, tape), w, tape);
  });
}

TEST(Autograd, LayerNorm) {
  auto x = rand_tensor(3, 6, true);
  auto gain = rand_tensor(1, 6, true, 0.5, 1.5);
  auto bias = rand_tensor(1, 6, true);
  auto w = rand_tensor(3, 6, false);
  expect_grads_match({x, gain, bias}, [&](Tape<double>* tape) {
    return weighted_sum(perceiver::layer_norm(x, gain, bias, 1e-5, tape), w, tape);
  });
}

TEST(Autograd, Gelu) {
  auto x = rand_tensor(2, 5, true, -2.0, 2.0);
  auto w = rand_tensor(2, 5, false);
  expect_grads_match({x}, [&](Tape<double>* tape) {
    return weighted_sum(perceiver::gelu(x, tape), w, tape);
  });
}

TEST(Autograd, SoftmaxRows) {
  auto x = rand_tensor(3, 5, true, -2.0, 2.0);
  auto w = rand_tensor(3, 5, false);
  expect_grads_match({x}, [&](Tape<double>* tape) {
    return weighted_sum(perceiver::softmax_rows(x, tape), w, tape);
  });
}

TEST(Autograd, MeanOverIndex) {
  auto x = rand_tensor(6, 3, true);
  auto w = rand_tensor(1, 3, false);
  expect_grads_match({x}, [&](Tape<double>* tape) {
    return weighted_sum(perceiver::mean_over_index(x, tape), w, tape);
  });
}

TEST(Autograd, SliceAndConcat) {
  auto x = rand_tensor(3, 6, true);
  auto w = rand_tensor(3, 8, false);
  expect_grads_match({x}, [&](Tape<double>* tape) {
    auto left = perceiver::slice_cols(x, 0, 2, tape);
    auto mid = perceiver::slice_cols(x, 2, 6, tape);
    // overlap: the first two columns contribute twice
    auto again = perceiver::slice_cols(x, 0, 2, tape);
    const std::vector<Tensor<double>> parts = {left, mid, again};
    return weighted_sum(perceiver::concat_cols(parts, tape), w, tape);
  });
}

TEST(Autograd, BroadcastRows) {
  auto v = rand_tensor(1, 4, true);
  auto w = rand_tensor(5, 4, false);
  expect_grads_match({v}, [&](Tape<double>* tape) {
    return weighted_sum(perceiver::broadcast_rows(v, 5, tape), w, tape);
  });
}

TEST(Autograd, SoftmaxCrossEntropy) {
  auto logits = rand_tensor(1, 5, true, -2.0, 2.0);
  expect_grads_match({logits}, [&](Tape<double>* tape) {
    return perceiver::softmax_cross_entropy(logits, 3, tape);
  });
}

TEST(Autograd, SigmoidCrossEntropy) {
  auto logits = rand_tensor(1, 4, true, -2.0, 2.0);
  const std::vector<double> targets = {1.0, 0.0, 0.25, 0.9};
  expect_grads_match({logits}, [&](Tape<double>* tape) {
    return perceiver::sigmoid_cross_entropy(logits, targets, tape);
  });
}

TEST(Autograd, AttentionShapedComposite) {
  // A miniature cross-attention shaped graph exercising every primitive the
  // model uses in one connected check.
  auto q = rand_tensor(2, 4, true);
  auto k = rand_tensor(5, 4, true);
  auto v = rand_tensor(5, 4, true);
  auto w = rand_tensor(2, 4, false);
  expect_grads_match({q, k, v}, [&](Tape<double>* tape) {
    auto scores = perceiver::scale(perceiver::matmul_nt(q, k, tape), 0.5, tape);
    auto probs = perceiver::softmax_rows(scores, tape);
    auto out = perceiver::matmul(probs, v, tape);
    return weighted_sum(perceiver::gelu(out, tape), w, tape);
  });
}

TEST(Autograd, NullTapeLeavesNoGradients) {
  auto x = rand_tensor(2, 2, true);
  auto y = perceiver::gelu(x, static_cast<Tape<double>*>(nullptr));
  EXPECT_FALSE(x.has_grad());
  EXPECT_FALSE(y.requires_grad());
}
