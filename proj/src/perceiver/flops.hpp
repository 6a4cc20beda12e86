#pragma once

// FLOP accounting convention, shared by the instrumented tensor ops and the
// analytic counter so the two agree exactly.
//
// Convention: unfused. A multiply and an accumulate are two operations, so a
// (a x b)(b x c) matrix product costs 2abc. Elementwise add / multiply /
// residual / bias terms cost one operation per output scalar. Transcendental
// calls (exp, erf) count as one operation each. Data movement (slicing,
// concatenation, head split/merge) is free. The per-row constants:
//
//   layer norm, row width C : mean C, center C, variance 2C, inv-std 3,
//                             scale C, affine 2C               -> 7C + 3
//   softmax, row length L   : max L-1, shift L, exp L, sum L-1,
//                             divide L                         -> 5L - 2
//   gelu, per scalar        : scale, erf, shift, halve, mul    -> 5
//
// Fused-multiply-add conventions halve the matmul-dominated total; callers
// that want that figure divide the unfused total by two.

#include <cstdint>

namespace perceiver::flops {

using count_t = std::uint64_t;

inline count_t matmul(count_t rows, count_t inner, count_t cols) {
  return 2 * rows * inner * cols;
}

inline count_t elementwise(count_t n) { return n; }

inline count_t bias_rows(count_t rows, count_t cols) { return rows * cols; }

inline count_t layer_norm(count_t rows, count_t width) {
  return rows * (7 * width + 3);
}

inline count_t softmax_rows(count_t rows, count_t length) {
  return rows * (5 * length - 2);
}

inline count_t gelu(count_t n) { return 5 * n; }

// Mean over the leading index dimension of an N x C array:
// (N-1) adds + 1 divide per column.
inline count_t mean_over_index(count_t n, count_t c) { return n * c; }

// ---- execution counter ------------------------------------------------------
//
// Single-threaded process-wide counter. Ops add to it only while enabled, so a
// test can bracket exactly one forward pass.

struct Counter {
  bool enabled = false;
  count_t total = 0;
};

inline Counter& counter() {
  static Counter c;
  return c;
}

inline void add(count_t n) {
  Counter& c = counter();
  if (c.enabled) c.total += n;
}

// RAII bracket: enables and zeroes the counter for its lifetime.
class CountScope {
 public:
  CountScope() {
    counter().enabled = true;
    counter().total = 0;
  }
  ~CountScope() { counter().enabled = false; }
  CountScope(const CountScope&) = delete;
  CountScope& operator=(const CountScope&) = delete;

  count_t total() const { return counter().total; }
};

}  // namespace perceiver::flops
