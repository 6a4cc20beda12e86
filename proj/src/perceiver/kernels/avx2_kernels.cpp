// AVX2+FMA backend. Vector form of the exact algorithms in
// scalar_kernels.cpp: identical lane layout, identical fold order, identical
// rounding points, so outputs match the scalar backend bit-for-bit.
//
// Compiled as a separate object with -mavx2 -mfma; only reached through the
// dispatch table after a cpuid check.

#if defined(__AVX2__)

#include "perceiver/kernels/kernel_table.hpp"

#include <immintrin.h>

#include <cmath>
#include <vector>

namespace perceiver::kern {
namespace {

inline double fold8(const double* l) {
  const double t0 = l[0] + l[4];
  const double t1 = l[1] + l[5];
  const double t2 = l[2] + l[6];
  const double t3 = l[3] + l[7];
  return (t0 + t2) + (t1 + t3);
}

inline double fold4(const double* l) { return (l[0] + l[2]) + (l[1] + l[3]); }

// Fold two 4-lane accumulators (lanes 0-3, lanes 4-7) per the f32 contract.
inline double fold_acc8(__m256d lo, __m256d hi) {
  alignas(32) double l[8];
  _mm256_store_pd(l, lo);
  _mm256_store_pd(l + 4, hi);
  return fold8(l);
}

inline double fold_acc4(__m256d acc) {
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  return fold4(l);
}

inline __m256d cvt_lo(__m256 v) { return _mm256_cvtps_pd(_mm256_castps256_ps128(v)); }
inline __m256d cvt_hi(__m256 v) { return _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)); }

// ---- striped reductions, f32 (8 float64 lanes) -----------------------------

double sum_f32(const float* x, std::size_t n) {
  __m256d lo = _mm256_setzero_pd(), hi = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    lo = _mm256_add_pd(lo, cvt_lo(v));
    hi = _mm256_add_pd(hi, cvt_hi(v));
  }
  alignas(32) double l[8];
  _mm256_store_pd(l, lo);
  _mm256_store_pd(l + 4, hi);
  for (std::size_t t = 0; i + t < n; ++t) l[t] += static_cast<double>(x[i + t]);
  return fold8(l);
}

double dot_f32(const float* x, const float* y, std::size_t n) {
  __m256d lo = _mm256_setzero_pd(), hi = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 a = _mm256_loadu_ps(x + i);
    const __m256 b = _mm256_loadu_ps(y + i);
    lo = _mm256_fmadd_pd(cvt_lo(a), cvt_lo(b), lo);
    hi = _mm256_fmadd_pd(cvt_hi(a), cvt_hi(b), hi);
  }
  alignas(32) double l[8];
  _mm256_store_pd(l, lo);
  _mm256_store_pd(l + 4, hi);
  for (std::size_t t = 0; i + t < n; ++t)
    l[t] = std::fma(static_cast<double>(x[i + t]), static_cast<double>(y[i + t]), l[t]);
  return fold8(l);
}

double sumsq_f32(const float* x, std::size_t n) {
  __m256d lo = _mm256_setzero_pd(), hi = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256d a = cvt_lo(v), b = cvt_hi(v);
    lo = _mm256_fmadd_pd(a, a, lo);
    hi = _mm256_fmadd_pd(b, b, hi);
  }
  alignas(32) double l[8];
  _mm256_store_pd(l, lo);
  _mm256_store_pd(l + 4, hi);
  for (std::size_t t = 0; i + t < n; ++t) {
    const double v = static_cast<double>(x[i + t]);
    l[t] = std::fma(v, v, l[t]);
  }
  return fold8(l);
}

double sumsq_centered_f32(const float* x, double mu, std::size_t n) {
  const __m256d vmu = _mm256_set1_pd(mu);
  __m256d lo = _mm256_setzero_pd(), hi = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256d a = _mm256_sub_pd(cvt_lo(v), vmu);
    const __m256d b = _mm256_sub_pd(cvt_hi(v), vmu);
    lo = _mm256_fmadd_pd(a, a, lo);
    hi = _mm256_fmadd_pd(b, b, hi);
  }
  alignas(32) double l[8];
  _mm256_store_pd(l, lo);
  _mm256_store_pd(l + 4, hi);
  for (std::size_t t = 0; i + t < n; ++t) {
    const double v = static_cast<double>(x[i + t]) - mu;
    l[t] = std::fma(v, v, l[t]);
  }
  return fold8(l);
}

// ---- striped reductions, f64 (4 lanes) --------------------------------------

double sum_f64(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  for (std::size_t t = 0; i + t < n; ++t) l[t] += x[i + t];
  return fold4(l);
}

double dot_f64(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  for (std::size_t t = 0; i + t < n; ++t) l[t] = std::fma(x[i + t], y[i + t], l[t]);
  return fold4(l);
}

double sumsq_f64(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  for (std::size_t t = 0; i + t < n; ++t) l[t] = std::fma(x[i + t], x[i + t], l[t]);
  return fold4(l);
}

double sumsq_centered_f64(const double* x, double mu, std::size_t n) {
  const __m256d vmu = _mm256_set1_pd(mu);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_sub_pd(_mm256_loadu_pd(x + i), vmu);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  for (std::size_t t = 0; i + t < n; ++t) {
    const double v = x[i + t] - mu;
    l[t] = std::fma(v, v, l[t]);
  }
  return fold4(l);
}

// ---- matrix products --------------------------------------------------------

void mm_nn_f32(const float* a, const float* b, float* c, std::size_t p, std::size_t q, std::size_t r) {
  thread_local std::vector<double> acc;
  acc.assign(r, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < r; ++j) acc[j] = 0.0;
    const float* arow = a + i * q;
    for (std::size_t k = 0; k < q; ++k) {
      const double av = static_cast<double>(arow[k]);
      const __m256d vav = _mm256_set1_pd(av);
      const float* brow = b + k * r;
      std::size_t j = 0;
      for (; j + 8 <= r; j += 8) {
        const __m256 bv = _mm256_loadu_ps(brow + j);
        __m256d a0 = _mm256_loadu_pd(acc.data() + j);
        __m256d a1 = _mm256_loadu_pd(acc.data() + j + 4);
        a0 = _mm256_fmadd_pd(vav, cvt_lo(bv), a0);
        a1 = _mm256_fmadd_pd(vav, cvt_hi(bv), a1);
        _mm256_storeu_pd(acc.data() + j, a0);
        _mm256_storeu_pd(acc.data() + j + 4, a1);
      }
      for (; j < r; ++j)
        acc[j] = std::fma(av, static_cast<double>(brow[j]), acc[j]);
    }
    float* crow = c + i * r;
    for (std::size_t j = 0; j < r; ++j) crow[j] = static_cast<float>(acc[j]);
  }
}

void mm_nn_f64(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r) {
  thread_local std::vector<double> acc;
  acc.assign(r, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < r; ++j) acc[j] = 0.0;
    const double* arow = a + i * q;
    for (std::size_t k = 0; k < q; ++k) {
      const __m256d vav = _mm256_set1_pd(arow[k]);
      const double* brow = b + k * r;
      std::size_t j = 0;
      for (; j + 4 <= r; j += 4) {
        __m256d av = _mm256_loadu_pd(acc.data() + j);
        av = _mm256_fmadd_pd(vav, _mm256_loadu_pd(brow + j), av);
        _mm256_storeu_pd(acc.data() + j, av);
      }
      for (; j < r; ++j) acc[j] = std::fma(arow[k], brow[j], acc[j]);
    }
    double* crow = c + i * r;
    for (std::size_t j = 0; j < r; ++j) crow[j] = acc[j];
  }
}

void mm_nt_f32(const float* a, const float* b, float* c, std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const float* arow = a + i * q;
    float* crow = c + i * r;
    for (std::size_t j = 0; j < r; ++j)
      crow[j] = static_cast<float>(dot_f32(arow, b + j * q, q));
  }
}

void mm_nt_f64(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const double* arow = a + i * q;
    double* crow = c + i * r;
    for (std::size_t j = 0; j < r; ++j) crow[j] = dot_f64(arow, b + j * q, q);
  }
}

void mm_tn_f32(const float* a, const float* b, float* c, std::size_t p, std::size_t q, std::size_t r) {
  thread_local std::vector<double> acc;
  acc.assign(q * r, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const float* arow = a + i * q;
    const float* brow = b + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double av = static_cast<double>(arow[k]);
      const __m256d vav = _mm256_set1_pd(av);
      double* accrow = acc.data() + k * r;
      std::size_t j = 0;
      for (; j + 8 <= r; j += 8) {
        const __m256 bv = _mm256_loadu_ps(brow + j);
        __m256d a0 = _mm256_loadu_pd(accrow + j);
        __m256d a1 = _mm256_loadu_pd(accrow + j + 4);
        a0 = _mm256_fmadd_pd(vav, cvt_lo(bv), a0);
        a1 = _mm256_fmadd_pd(vav, cvt_hi(bv), a1);
        _mm256_storeu_pd(accrow + j, a0);
        _mm256_storeu_pd(accrow + j + 4, a1);
      }
      for (; j < r; ++j)
        accrow[j] = std::fma(av, static_cast<double>(brow[j]), accrow[j]);
    }
  }
  for (std::size_t k = 0; k < q * r; ++k) c[k] = static_cast<float>(acc[k]);
}

void mm_tn_f64(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r) {
  thread_local std::vector<double> acc;
  acc.assign(q * r, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const double* arow = a + i * q;
    const double* brow = b + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const __m256d vav = _mm256_set1_pd(arow[k]);
      double* accrow = acc.data() + k * r;
      std::size_t j = 0;
      for (; j + 4 <= r; j += 4) {
        __m256d av = _mm256_loadu_pd(accrow + j);
        av = _mm256_fmadd_pd(vav, _mm256_loadu_pd(brow + j), av);
        _mm256_storeu_pd(accrow + j, av);
      }
      for (; j < r; ++j) accrow[j] = std::fma(arow[k], brow[j], accrow[j]);
    }
  }
  for (std::size_t k = 0; k < q * r; ++k) c[k] = acc[k];
}

// ---- elementwise ------------------------------------------------------------

void add_f32(const float* a, const float* b, float* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void add_f64(const double* a, const double* b, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void mul_f32(const float* a, const float* b, float* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

void mul_f64(const double* a, const double* b, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

void scale_f32(const float* a, float s, float* c, std::size_t n) {
  const __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), vs));
  for (; i < n; ++i) c[i] = a[i] * s;
}

void scale_f64(const double* a, double s, double* c, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vs));
  for (; i < n; ++i) c[i] = a[i] * s;
}

void axpy_f32(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void axpy_f64(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void bias_rows_f32(float* x, const float* b, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    float* row = x + i * cols;
    std::size_t j = 0;
    for (; j + 8 <= cols; j += 8)
      _mm256_storeu_ps(row + j, _mm256_add_ps(_mm256_loadu_ps(row + j), _mm256_loadu_ps(b + j)));
    for (; j < cols; ++j) row[j] = row[j] + b[j];
  }
}

void bias_rows_f64(double* x, const double* b, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = x + i * cols;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4)
      _mm256_storeu_pd(row + j, _mm256_add_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(b + j)));
    for (; j < cols; ++j) row[j] = row[j] + b[j];
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t = {
      "avx2",
      mm_nn_f32, mm_nn_f64,
      mm_nt_f32, mm_nt_f64,
      mm_tn_f32, mm_tn_f64,
      add_f32, add_f64,
      mul_f32, mul_f64,
      scale_f32, scale_f64,
      axpy_f32, axpy_f64,
      bias_rows_f32, bias_rows_f64,
      sum_f32, sum_f64,
      dot_f32, dot_f64,
      sumsq_f32, sumsq_f64,
      sumsq_centered_f32, sumsq_centered_f64,
  };
  return t;
}

}  // namespace perceiver::kern

#endif  // __AVX2__
