// Scalar reference backend. Spells out the canonical reduction order from
// kernel_table.hpp; the AVX2 backend reproduces it instruction-for-instruction
// in vector form, so the two are bit-identical.

#include "perceiver/kernels/kernel_table.hpp"

#include <cmath>
#include <vector>

namespace perceiver::kern {
namespace {

// Lane count for striped reductions: 8 for f32 inputs, 4 for f64.
template <typename T> constexpr std::size_t kLanes = sizeof(T) == 4 ? 8 : 4;

inline double fold8(const double* l) {
  const double t0 = l[0] + l[4];
  const double t1 = l[1] + l[5];
  const double t2 = l[2] + l[6];
  const double t3 = l[3] + l[7];
  return (t0 + t2) + (t1 + t3);
}

inline double fold4(const double* l) { return (l[0] + l[2]) + (l[1] + l[3]); }

template <typename T> inline double fold(const double* l) {
  if constexpr (kLanes<T> == 8) {
    return fold8(l);
  } else {
    return fold4(l);
  }
}

template <typename T>
double striped_sum(const T* x, std::size_t n) {
  double l[kLanes<T>] = {};
  for (std::size_t i = 0; i < n; ++i) l[i % kLanes<T>] += static_cast<double>(x[i]);
  return fold<T>(l);
}

template <typename T>
double striped_dot(const T* x, const T* y, std::size_t n) {
  double l[kLanes<T>] = {};
  for (std::size_t i = 0; i < n; ++i)
    l[i % kLanes<T>] = std::fma(static_cast<double>(x[i]), static_cast<double>(y[i]), l[i % kLanes<T>]);
  return fold<T>(l);
}

template <typename T>
double striped_sumsq(const T* x, std::size_t n) {
  double l[kLanes<T>] = {};
  for (std::size_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(x[i]);
    l[i % kLanes<T>] = std::fma(v, v, l[i % kLanes<T>]);
  }
  return fold<T>(l);
}

template <typename T>
double striped_sumsq_centered(const T* x, double mu, std::size_t n) {
  double l[kLanes<T>] = {};
  for (std::size_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(x[i]) - mu;
    l[i % kLanes<T>] = std::fma(v, v, l[i % kLanes<T>]);
  }
  return fold<T>(l);
}

// c[p x r] = a[p x q] * b[q x r]; serial over k, float64 accumulators.
template <typename T>
void mm_nn(const T* a, const T* b, T* c, std::size_t p, std::size_t q, std::size_t r) {
  thread_local std::vector<double> acc;
  acc.assign(r, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < r; ++j) acc[j] = 0.0;
    const T* arow = a + i * q;
    for (std::size_t k = 0; k < q; ++k) {
      const double av = static_cast<double>(arow[k]);
      const T* brow = b + k * r;
      for (std::size_t j = 0; j < r; ++j)
        acc[j] = std::fma(av, static_cast<double>(brow[j]), acc[j]);
    }
    T* crow = c + i * r;
    for (std::size_t j = 0; j < r; ++j) crow[j] = static_cast<T>(acc[j]);
  }
}

// c[p x r] = a[p x q] * b[r x q]^T; one striped dot per output cell.
template <typename T>
void mm_nt(const T* a, const T* b, T* c, std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const T* arow = a + i * q;
    T* crow = c + i * r;
    for (std::size_t j = 0; j < r; ++j)
      crow[j] = static_cast<T>(striped_dot(arow, b + j * q, q));
  }
}

// c[q x r] = a[p x q]^T * b[p x r]; serial over i, float64 accumulators.
template <typename T>
void mm_tn(const T* a, const T* b, T* c, std::size_t p, std::size_t q, std::size_t r) {
  thread_local std::vector<double> acc;
  acc.assign(q * r, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const T* arow = a + i * q;
    const T* brow = b + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double av = static_cast<double>(arow[k]);
      double* accrow = acc.data() + k * r;
      for (std::size_t j = 0; j < r; ++j)
        accrow[j] = std::fma(av, static_cast<double>(brow[j]), accrow[j]);
    }
  }
  for (std::size_t k = 0; k < q * r; ++k) c[k] = static_cast<T>(acc[k]);
}

template <typename T>
void add(const T* a, const T* b, T* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

template <typename T>
void scale(const T* a, T s, T* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * s;
}

template <typename T>
void axpy(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

template <typename T>
void bias_rows(T* x, const T* b, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    T* row = x + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] = row[j] + b[j];
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t = {
      "scalar",
      mm_nn<float>, mm_nn<double>,
      mm_nt<float>, mm_nt<double>,
      mm_tn<float>, mm_tn<double>,
      add<float>, add<double>,
      mul<float>, mul<double>,
      scale<float>, scale<double>,
      axpy<float>, axpy<double>,
      bias_rows<float>, bias_rows<double>,
      striped_sum<float>, striped_sum<double>,
      striped_dot<float>, striped_dot<double>,
      striped_sumsq<float>, striped_sumsq<double>,
      striped_sumsq_centered<float>, striped_sumsq_centered<double>,
  };
  return t;
}

}  // namespace perceiver::kern
