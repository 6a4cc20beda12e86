#pragma once

// Differentiable primitives. Every op:
//   1. validates shapes (shape_error),
//   2. runs forward through the dispatched kernels,
//   3. adds its cost to the FLOP counter per the convention in flops.hpp,
//   4. verifies the output is finite (numeric_error),
//   5. if a tape is supplied and a differentiable input requires gradients,
//      appends an adjoint closure.
//
// Adjoint closures treat a missing output-gradient buffer as all-zero and
// skip; gradients accumulate (+=) into input buffers, which is what makes
// weight sharing behave like an unrolled RNN.

#include "perceiver/common.hpp"
#include "perceiver/flops.hpp"
#include "perceiver/kernels/kernel_table.hpp"
#include "perceiver/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace perceiver {

namespace detail {

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* op) {
  for (const T& v : t.values())
    if (!std::isfinite(static_cast<double>(v)))
      throw numeric_error(std::string(op) + ": non-finite value in output");
}

template <typename T>
inline bool wants_grad(const Tape<T>* tape, std::initializer_list<bool> inputs) {
  if (tape == nullptr) return false;
  for (bool b : inputs)
    if (b) return true;
  return false;
}

// out.grad is all-zero (or absent) -> adjoint is a no-op.
template <typename T>
inline bool no_upstream(const Tensor<T>& out) {
  return !out.has_grad();
}

// Column sums of g's gradient-sized buffer into acc (serial over rows).
template <typename T>
inline void add_colsum(const std::vector<T>& dy, std::size_t rows, std::size_t cols,
                       std::vector<T>& acc) {
  for (std::size_t i = 0; i < rows; ++i)
    kern::Dispatch<T>::add(acc.data(), dy.data() + i * cols, acc.data(), cols);
}

}  // namespace detail

// ---- matmul family ----------------------------------------------------------

// c[p x r] = a[p x q] * b[q x r]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape) {
  if (a.ndim() != 2 || b.ndim() != 2) throw shape_error("matmul: operands must be rank-2");
  const std::size_t p = a.shape()[0], q = a.shape()[1], r = b.shape()[1];
  if (b.shape()[0] != q) throw shape_error("matmul: inner dimensions disagree");
  Tensor<T> c({p, r});
  kern::Dispatch<T>::mm_nn(a.data(), b.data(), c.data(), p, q, r);
  flops::add(flops::matmul(p, q, r));
  detail::check_finite(c, "matmul");
  if (detail::wants_grad(tape, {a.requires_grad(), b.requires_grad()})) {
    c.set_requires_grad(true);
    Tensor<T> ac = a, bc = b, cc = c;
    tape->record([ac, bc, cc, p, q, r]() mutable {
      if (detail::no_upstream(cc)) return;
      const T* dc = cc.grad().data();
      if (ac.requires_grad()) {
        std::vector<T> da(p * q);
        kern::Dispatch<T>::mm_nt(dc, bc.data(), da.data(), p, r, q);
        kern::Dispatch<T>::add(ac.grad().data(), da.data(), ac.grad().data(), p * q);
      }
      if (bc.requires_grad()) {
        std::vector<T> db(q * r);
        kern::Dispatch<T>::mm_tn(ac.data(), dc, db.data(), p, q, r);
        kern::Dispatch<T>::add(bc.grad().data(), db.data(), bc.grad().data(), q * r);
      }
    });
  }
  return c;
}

// c[p x r] = a[p x q] * b[r x q]^T   (rows of b are the keys)
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape) {
  if (a.ndim() != 2 || b.ndim() != 2) throw shape_error("matmul_nt: operands must be rank-2");
  const std::size_t p = a.shape()[0], q = a.shape()[1], r = b.shape()[0];
  if (b.shape()[1] != q) throw shape_error("matmul_nt: trailing dimensions disagree");
  Tensor<T> c({p, r});
  kern::Dispatch<T>::mm_nt(a.data(), b.data(), c.data(), p, q, r);
  flops::add(flops::matmul(p, q, r));
  detail::check_finite(c, "matmul_nt");
  if (detail::wants_grad(tape, {a.requires_grad(), b.requires_grad()})) {
    c.set_requires_grad(true);
    Tensor<T> ac = a, bc = b, cc = c;
    tape->record([ac, bc, cc, p, q, r]() mutable {
      if (detail::no_upstream(cc)) return;
      const T* dc = cc.grad().data();
      if (ac.requires_grad()) {
        std::vector<T> da(p * q);
        kern::Dispatch<T>::mm_nn(dc, bc.data(), da.data(), p, r, q);
        kern::Dispatch<T>::add(ac.grad().data(), da.data(), ac.grad().data(), p * q);
      }
      if (bc.requires_grad()) {
        std::vector<T> db(r * q);
        kern::Dispatch<T>::mm_tn(dc, ac.data(), db.data(), p, r, q);
        kern::Dispatch<T>::add(bc.grad().data(), db.data(), bc.grad().data(), r * q);
      }
    });
  }
  return c;
}

// y[... x Cout] = x[... x Cin] * w[Cin x Cout] + b[Cout]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tape<T>* tape) {
  if (x.ndim() < 1 || w.ndim() != 2 || b.ndim() != 1)
    throw shape_error("linear: expected x[..,Cin], w[Cin,Cout], b[Cout]");
  const std::size_t cin = w.shape()[0], cout = w.shape()[1];
  if (x.cols() != cin) throw shape_error("linear: input width does not match weight rows");
  if (b.shape()[0] != cout) throw shape_error("linear: bias width does not match weight cols");
  const std::size_t rows = x.rows();
  std::vector<std::size_t> out_shape = x.shape();
  out_shape.back() = cout;
  Tensor<T> y(out_shape);
  kern::Dispatch<T>::mm_nn(x.data(), w.data(), y.data(), rows, cin, cout);
  kern::Dispatch<T>::bias_rows(y.data(), b.data(), rows, cout);
  flops::add(flops::matmul(rows, cin, cout));
  flops::add(flops::bias_rows(rows, cout));
  detail::check_finite(y, "linear");
  if (detail::wants_grad(tape, {x.requires_grad(), w.requires_grad(), b.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, wc = w, bc = b, yc = y;
    tape->record([xc, wc, bc, yc, rows, cin, cout]() mutable {
      if (detail::no_upstream(yc)) return;
      const T* dy = yc.grad().data();
      if (xc.requires_grad()) {
        std::vector<T> dx(rows * cin);
        kern::Dispatch<T>::mm_nt(dy, wc.data(), dx.data(), rows, cout, cin);
        kern::Dispatch<T>::add(xc.grad().data(), dx.data(), xc.grad().data(), rows * cin);
      }
      if (wc.requires_grad()) {
        std::vector<T> dw(cin * cout);
        kern::Dispatch<T>::mm_tn(xc.data(), dy, dw.data(), rows, cin, cout);
        kern::Dispatch<T>::add(wc.grad().data(), dw.data(), wc.grad().data(), cin * cout);
      }
      if (bc.requires_grad()) detail::add_colsum(yc.grad(), rows, cout, bc.grad());
    });
  }
  return y;
}

// ---- elementwise ------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape) {
  if (a.shape() != b.shape()) throw shape_error("add: shape mismatch");
  Tensor<T> c(a.shape());
  kern::Dispatch<T>::add(a.data(), b.data(), c.data(), c.size());
  flops::add(flops::elementwise(c.size()));
  detail::check_finite(c, "add");
  if (detail::wants_grad(tape, {a.requires_grad(), b.requires_grad()})) {
    c.set_requires_grad(true);
    Tensor<T> ac = a, bc = b, cc = c;
    tape->record([ac, bc, cc]() mutable {
      if (detail::no_upstream(cc)) return;
      const std::vector<T>& dc = cc.grad();
      if (ac.requires_grad())
        kern::Dispatch<T>::add(ac.grad().data(), dc.data(), ac.grad().data(), dc.size());
      if (bc.requires_grad())
        kern::Dispatch<T>::add(bc.grad().data(), dc.data(), bc.grad().data(), dc.size());
    });
  }
  return c;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape) {
  if (a.shape() != b.shape()) throw shape_error("mul: shape mismatch");
  Tensor<T> c(a.shape());
  kern::Dispatch<T>::mul(a.data(), b.data(), c.data(), c.size());
  flops::add(flops::elementwise(c.size()));
  detail::check_finite(c, "mul");
  if (detail::wants_grad(tape, {a.requires_grad(), b.requires_grad()})) {
    c.set_requires_grad(true);
    Tensor<T> ac = a, bc = b, cc = c;
    tape->record([ac, bc, cc]() mutable {
      if (detail::no_upstream(cc)) return;
      const std::vector<T>& dc = cc.grad();
      std::vector<T> tmp(dc.size());
      if (ac.requires_grad()) {
        kern::Dispatch<T>::mul(dc.data(), bc.data(), tmp.data(), dc.size());
        kern::Dispatch<T>::add(ac.grad().data(), tmp.data(), ac.grad().data(), dc.size());
      }
      if (bc.requires_grad()) {
        kern::Dispatch<T>::mul(dc.data(), ac.data(), tmp.data(), dc.size());
        kern::Dispatch<T>::add(bc.grad().data(), tmp.data(), bc.grad().data(), dc.size());
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s, Tape<T>* tape) {
  Tensor<T> c(a.shape());
  kern::Dispatch<T>::scale(a.data(), s, c.data(), c.size());
  flops::add(flops::elementwise(c.size()));
  detail::check_finite(c, "scale");
  if (detail::wants_grad(tape, {a.requires_grad()})) {
    c.set_requires_grad(true);
    Tensor<T> ac = a, cc = c;
    tape->record([ac, cc, s]() mutable {
      if (detail::no_upstream(cc)) return;
      kern::Dispatch<T>::axpy(s, cc.grad().data(), ac.grad().data(), ac.size());
    });
  }
  return c;
}

// ---- normalization / activation ---------------------------------------------

// Row-wise layer norm over the trailing dimension, population variance,
// learnable gain and bias. Row statistics and the normalization chain are
// computed in float64 regardless of T (one rounding at the end).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     double eps, Tape<T>* tape) {
  if (x.ndim() < 1) throw shape_error("layer_norm: rank-0 input");
  const std::size_t c = x.cols(), rows = x.rows();
  if (c == 0) throw shape_error("layer_norm: empty rows");
  if (gain.size() != c || bias.size() != c)
    throw shape_error("layer_norm: gain/bias width must equal the row width");
  if (eps <= 0.0) throw domain_error("layer_norm: eps must be positive");
  Tensor<T> y(x.shape());
  std::vector<double> mu(rows), rstd(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const T* row = x.data() + i * c;
    const double m = kern::Dispatch<T>::sum(row, c) / static_cast<double>(c);
    const double var = kern::Dispatch<T>::sumsq_centered(row, m, c) / static_cast<double>(c);
    const double r = 1.0 / std::sqrt(var + eps);
    mu[i] = m;
    rstd[i] = r;
    T* out = y.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      const double n = (static_cast<double>(row[j]) - m) * r;
      out[j] = static_cast<T>(n * static_cast<double>(gain.data()[j]) +
                              static_cast<double>(bias.data()[j]));
    }
  }
  flops::add(flops::layer_norm(rows, c));
  detail::check_finite(y, "layer_norm");
  if (detail::wants_grad(tape, {x.requires_grad(), gain.requires_grad(), bias.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, gc = gain, bc = bias, yc = y;
    tape->record([xc, gc, bc, yc, mu, rstd, rows, c]() mutable {
      if (detail::no_upstream(yc)) return;
      const T* dy = yc.grad().data();
      std::vector<T>* dgain = gc.requires_grad() ? &gc.grad() : nullptr;
      std::vector<T>* dbias = bc.requires_grad() ? &bc.grad() : nullptr;
      std::vector<T>* dx = xc.requires_grad() ? &xc.grad() : nullptr;
      for (std::size_t i = 0; i < rows; ++i) {
        const T* xrow = xc.data() + i * c;
        const T* dyrow = dy + i * c;
        const double m = mu[i], r = rstd[i];
        double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double xhat = (static_cast<double>(xrow[j]) - m) * r;
          const double dyg = static_cast<double>(dyrow[j]) * static_cast<double>(gc.data()[j]);
          sum_dyg += dyg;
          sum_dyg_xhat += dyg * xhat;
          if (dgain) (*dgain)[j] += static_cast<T>(static_cast<double>(dyrow[j]) * xhat);
          if (dbias) (*dbias)[j] += dyrow[j];
        }
        if (dx) {
          const double inv_c = 1.0 / static_cast<double>(c);
          T* dxrow = dx->data() + i * c;
          for (std::size_t j = 0; j < c; ++j) {
            const double xhat = (static_cast<double>(xrow[j]) - m) * r;
            const double dyg = static_cast<double>(dyrow[j]) * static_cast<double>(gc.data()[j]);
            dxrow[j] += static_cast<T>(r * (dyg - inv_c * sum_dyg - xhat * inv_c * sum_dyg_xhat));
          }
        }
      }
    });
  }
  return y;
}

// Exact (erf-based) GELU: x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x, Tape<T>* tape) {
  Tensor<T> y(x.shape());
  const double inv_sqrt2 = 0.70710678118654752440084436210485;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = static_cast<double>(x.data()[i]);
    y.data()[i] = static_cast<T>(v * 0.5 * (1.0 + std::erf(v * inv_sqrt2)));
  }
  flops::add(flops::gelu(x.size()));
  detail::check_finite(y, "gelu");
  if (detail::wants_grad(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape->record([xc, yc, inv_sqrt2]() mutable {
      if (detail::no_upstream(yc)) return;
      const double inv_sqrt2pi = 0.39894228040143267793994605993438;
      const T* dy = yc.grad().data();
      std::vector<T>& dx = xc.grad();
      for (std::size_t i = 0; i < xc.size(); ++i) {
        const double v = static_cast<double>(xc.data()[i]);
        const double phi_cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        const double phi_pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
        dx[i] += static_cast<T>(static_cast<double>(dy[i]) * (phi_cdf + v * phi_pdf));
      }
    });
  }
  return y;
}

// Row-wise softmax over the trailing dimension, max-shifted.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x, Tape<T>* tape) {
  if (x.ndim() < 1) throw shape_error("softmax_rows: rank-0 input");
  const std::size_t c = x.cols(), rows = x.rows();
  if (c == 0) throw shape_error("softmax_rows: empty rows");
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    const T* row = x.data() + i * c;
    T* out = y.data() + i * c;
    double m = static_cast<double>(row[0]);
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, static_cast<double>(row[j]));
    for (std::size_t j = 0; j < c; ++j)
      out[j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - m));
    const double s = kern::Dispatch<T>::sum(out, c);
    for (std::size_t j = 0; j < c; ++j)
      out[j] = static_cast<T>(static_cast<double>(out[j]) / s);
  }
  flops::add(flops::softmax_rows(rows, c));
  detail::check_finite(y, "softmax_rows");
  if (detail::wants_grad(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape->record([xc, yc, rows, c]() mutable {
      if (detail::no_upstream(yc)) return;
      const T* dy = yc.grad().data();
      std::vector<T>& dx = xc.grad();
      for (std::size_t i = 0; i < rows; ++i) {
        const T* yrow = yc.data() + i * c;
        const T* dyrow = dy + i * c;
        const double s = kern::Dispatch<T>::dot(dyrow, yrow, c);
        for (std::size_t j = 0; j < c; ++j)
          dx[i * c + j] += static_cast<T>(static_cast<double>(yrow[j]) *
                                          (static_cast<double>(dyrow[j]) - s));
      }
    });
  }
  return y;
}

// ---- reductions / reshapes ---------------------------------------------------

// Mean over the leading (index) dimension: [N x C] -> [1 x C].
template <typename T>
Tensor<T> mean_over_index(const Tensor<T>& x, Tape<T>* tape) {
  if (x.ndim() != 2) throw shape_error("mean_over_index: expected a rank-2 input");
  const std::size_t n = x.shape()[0], c = x.shape()[1];
  if (n == 0) throw shape_error("mean_over_index: empty index dimension");
  Tensor<T> y({1, c});
  std::vector<double> acc(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) acc[j] += static_cast<double>(row[j]);
  }
  for (std::size_t j = 0; j < c; ++j)
    y.data()[j] = static_cast<T>(acc[j] / static_cast<double>(n));
  flops::add(flops::mean_over_index(n, c));
  detail::check_finite(y, "mean_over_index");
  if (detail::wants_grad(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape->record([xc, yc, n, c]() mutable {
      if (detail::no_upstream(yc)) return;
      const T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
      std::vector<T>& dx = xc.grad();
      for (std::size_t i = 0; i < n; ++i)
        kern::Dispatch<T>::axpy(inv_n, yc.grad().data(), dx.data() + i * c, c);
    });
  }
  return y;
}

// Sum of all entries -> scalar [1].
template <typename T>
Tensor<T> sum_all(const Tensor<T>& x, Tape<T>* tape) {
  Tensor<T> y({1});
  y.data()[0] = static_cast<T>(kern::Dispatch<T>::sum(x.data(), x.size()));
  flops::add(flops::elementwise(x.size()));
  detail::check_finite(y, "sum_all");
  if (detail::wants_grad(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape->record([xc, yc]() mutable {
      if (detail::no_upstream(yc)) return;
      const T g = yc.grad()[0];
      std::vector<T>& dx = xc.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g;
    });
  }
  return y;
}

// Column slice [R x C] -> [R x (c1-c0)]; data movement, zero FLOPs.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t c0, std::size_t c1, Tape<T>* tape) {
  if (x.ndim() != 2) throw shape_error("slice_cols: expected a rank-2 input");
  const std::size_t rows = x.shape()[0], c = x.shape()[1];
  if (!(c0 < c1) || c1 > c) throw shape_error("slice_cols: bad column range");
  const std::size_t w = c1 - c0;
  Tensor<T> y({rows, w});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < w; ++j) y.at(i, j) = x.at(i, c0 + j);
  if (detail::wants_grad(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape->record([xc, yc, rows, w, c0]() mutable {
      if (detail::no_upstream(yc)) return;
      std::vector<T>& dx = xc.grad();
      const std::size_t c = xc.cols();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < w; ++j) dx[i * c + c0 + j] += yc.grad()[i * w + j];
    });
  }
  return y;
}

// Column-wise concatenation of equal-height blocks; data movement, zero FLOPs.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts, Tape<T>* tape) {
  if (parts.empty()) throw shape_error("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t total = 0;
  bool any_grad = false;
  for (const Tensor<T>& p : parts) {
    if (p.ndim() != 2 || p.shape()[0] != rows)
      throw shape_error("concat_cols: inputs must be rank-2 with equal row counts");
    total += p.shape()[1];
    any_grad = any_grad || p.requires_grad();
  }
  Tensor<T> y({rows, total});
  std::size_t off = 0;
  for (const Tensor<T>& p : parts) {
    const std::size_t w = p.shape()[1];
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < w; ++j) y.at(i, off + j) = p.at(i, j);
    off += w;
  }
  if (tape != nullptr && any_grad) {
    y.set_requires_grad(true);
    std::vector<Tensor<T>> pc = parts;
    Tensor<T> yc = y;
    tape->record([pc, yc, rows, total]() mutable {
      if (detail::no_upstream(yc)) return;
      std::size_t off = 0;
      for (Tensor<T>& p : pc) {
        const std::size_t w = p.shape()[1];
        if (p.requires_grad()) {
          std::vector<T>& dp = p.grad();
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < w; ++j) dp[i * w + j] += yc.grad()[i * total + off + j];
        }
        off += w;
      }
    });
  }
  return y;
}

// Repeat a [1 x C] (or [C]) vector across R rows; data movement, zero FLOPs.
template <typename T>
Tensor<T> broadcast_rows(const Tensor<T>& v, std::size_t rows, Tape<T>* tape) {
  const std::size_t c = v.size();
  if (c == 0) throw shape_error("broadcast_rows: empty vector");
  Tensor<T> y({rows, c});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < c; ++j) y.data()[i * c + j] = v.data()[j];
  if (detail::wants_grad(tape, {v.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> vc = v, yc = y;
    tape->record([vc, yc, rows, c]() mutable {
      if (detail::no_upstream(yc)) return;
      detail::add_colsum(yc.grad(), rows, c, vc.grad());
    });
  }
  return y;
}

// ---- losses -------------------------------------------------------------------

// Softmax cross-entropy of a [1 x C] logit row against an integer label.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t target, Tape<T>* tape) {
  if (logits.ndim() != 2 || logits.shape()[0] != 1)
    throw shape_error("softmax_cross_entropy: expected [1 x C] logits");
  const std::size_t c = logits.shape()[1];
  if (target >= c) throw domain_error("softmax_cross_entropy: label out of range");
  double m = static_cast<double>(logits.data()[0]);
  for (std::size_t j = 1; j < c; ++j) m = std::max(m, static_cast<double>(logits.data()[j]));
  double se = 0.0;
  for (std::size_t j = 0; j < c; ++j) se += std::exp(static_cast<double>(logits.data()[j]) - m);
  const double lse = m + std::log(se);
  Tensor<T> loss({1});
  loss.data()[0] = static_cast<T>(lse - static_cast<double>(logits.data()[target]));
  flops::add(flops::softmax_rows(1, c) + flops::elementwise(2));
  detail::check_finite(loss, "softmax_cross_entropy");
  if (detail::wants_grad(tape, {logits.requires_grad()})) {
    loss.set_requires_grad(true);
    Tensor<T> lc = logits, oc = loss;
    tape->record([lc, oc, target, c, m, se]() mutable {
      if (detail::no_upstream(oc)) return;
      const double g = static_cast<double>(oc.grad()[0]);
      std::vector<T>& dl = lc.grad();
      for (std::size_t j = 0; j < c; ++j) {
        const double p = std::exp(static_cast<double>(lc.data()[j]) - m) / se;
        const double ind = (j == target) ? 1.0 : 0.0;
        dl[j] += static_cast<T>(g * (p - ind));
      }
    });
  }
  return loss;
}

// Summed sigmoid binary cross-entropy of [1 x C] logits against {0,1} targets,
// in the numerically stable max(x,0) - x t + log1p(exp(-|x|)) form.
template <typename T>
Tensor<T> sigmoid_cross_entropy(const Tensor<T>& logits, const std::vector<double>& targets,
                                Tape<T>* tape) {
  if (logits.ndim() != 2 || logits.shape()[0] != 1)
    throw shape_error("sigmoid_cross_entropy: expected [1 x C] logits");
  const std::size_t c = logits.shape()[1];
  if (targets.size() != c) throw shape_error("sigmoid_cross_entropy: target width mismatch");
  for (double t : targets)
    if (t < 0.0 || t > 1.0) throw domain_error("sigmoid_cross_entropy: targets must be in [0,1]");
  double total = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    const double x = static_cast<double>(logits.data()[j]);
    total += std::max(x, 0.0) - x * targets[j] + std::log1p(std::exp(-std::abs(x)));
  }
  Tensor<T> loss({1});
  loss.data()[0] = static_cast<T>(total);
  flops::add(flops::elementwise(5 * c));
  detail::check_finite(loss, "sigmoid_cross_entropy");
  if (detail::wants_grad(tape, {logits.requires_grad()})) {
    loss.set_requires_grad(true);
    Tensor<T> lc = logits, oc = loss;
    std::vector<double> tc = targets;
    tape->record([lc, oc, tc, c]() mutable {
      if (detail::no_upstream(oc)) return;
      const double g = static_cast<double>(oc.grad()[0]);
      std::vector<T>& dl = lc.grad();
      for (std::size_t j = 0; j < c; ++j) {
        const double x = static_cast<double>(lc.data()[j]);
        const double sig = 1.0 / (1.0 + std::exp(-x));
        dl[j] += static_cast<T>(g * (sig - tc[j]));
      }
    });
  }
  return loss;
}

}  // namespace perceiver
