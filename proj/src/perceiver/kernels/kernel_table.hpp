#pragma once

// Numeric kernel backends.
//
// The tensor layer calls through a runtime-selected table of kernels. Two
// backends exist: a scalar reference and an AVX2+FMA variant. Both implement
// the *same documented algorithm*, so their results are bit-identical and the
// equivalence suite can assert exact equality. Backend selection happens once
// (cpuid, overridable via the PERCEIVER_KERNELS env var or set_backend()).
//
// Reduction-order contract
// ------------------------
// Floating-point sums are not associative, so every reduction fixes its
// order:
//
//  * Striped reductions (dot, sum, sumsq, sumsq_centered, and the inner loop
//    of mm_nt): element i accumulates into float64 lane (i mod LANES), with
//    LANES = 8 for f32 data and 4 for f64 data. Lanes fold as
//        f32: t_j = l_j + l_{j+4} (j=0..3), result = (t_0+t_2) + (t_1+t_3)
//        f64:                               result = (l_0+l_2) + (l_1+l_3)
//    Products accumulate via IEEE fma in float64.
//
//  * mm_nn / mm_tn accumulate strictly serially over the contraction index
//    into float64 accumulators (one fma per term), vectorization runs across
//    independent output columns.
//
// f32 inputs are widened to float64 before any multiply/accumulate; the result
// rounds to f32 once at the end. Consequences: scalar and AVX2 agree bitwise,
// results are identical run-to-run, and reordering input rows perturbs a
// reduction only at float64 epsilon (at most an ulp or two after rounding back
// to f32).
//
// Elementwise kernels (add, mul, scale, axpy, bias_rows) work in the native
// precision; per-element IEEE ops need no order contract.

#include <cstddef>

namespace perceiver::kern {

struct KernelTable {
  const char* name;

  // c[p x r] = a[p x q] * b[q x r]
  void (*mm_nn_f32)(const float*, const float*, float*, std::size_t, std::size_t, std::size_t);
  void (*mm_nn_f64)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
  // c[p x r] = a[p x q] * b[r x q]^T
  void (*mm_nt_f32)(const float*, const float*, float*, std::size_t, std::size_t, std::size_t);
  void (*mm_nt_f64)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
  // c[q x r] = a[p x q]^T * b[p x r]
  void (*mm_tn_f32)(const float*, const float*, float*, std::size_t, std::size_t, std::size_t);
  void (*mm_tn_f64)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);

  void (*add_f32)(const float*, const float*, float*, std::size_t);
  void (*add_f64)(const double*, const double*, double*, std::size_t);
  void (*mul_f32)(const float*, const float*, float*, std::size_t);
  void (*mul_f64)(const double*, const double*, double*, std::size_t);
  void (*scale_f32)(const float*, float, float*, std::size_t);
  void (*scale_f64)(const double*, double, double*, std::size_t);
  // y[i] = fma(a, x[i], y[i])
  void (*axpy_f32)(float, const float*, float*, std::size_t);
  void (*axpy_f64)(double, const double*, double*, std::size_t);
  // x[row, col] += b[col]
  void (*bias_rows_f32)(float*, const float*, std::size_t, std::size_t);
  void (*bias_rows_f64)(double*, const double*, std::size_t, std::size_t);

  double (*sum_f32)(const float*, std::size_t);
  double (*sum_f64)(const double*, std::size_t);
  double (*dot_f32)(const float*, const float*, std::size_t);
  double (*dot_f64)(const double*, const double*, std::size_t);
  double (*sumsq_f32)(const float*, std::size_t);
  double (*sumsq_f64)(const double*, std::size_t);
  double (*sumsq_centered_f32)(const float*, double, std::size_t);
  double (*sumsq_centered_f64)(const double*, double, std::size_t);
};

const KernelTable& scalar_table();
#if defined(PERCEIVER_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

// Active backend. Default: AVX2 when the CPU supports avx2+fma (unless the
// PERCEIVER_KERNELS env var says "scalar"), scalar otherwise.
const KernelTable& active();
// Force a backend by name ("scalar" / "avx2"); throws config_error for an
// unknown or unavailable backend. Intended for the equivalence tests.
void set_backend(const char* name);
bool avx2_available();

// ---- typed shims -----------------------------------------------------------

template <typename T> struct Dispatch;

template <> struct Dispatch<float> {
  static void mm_nn(const float* a, const float* b, float* c, std::size_t p, std::size_t q, std::size_t r) { active().mm_nn_f32(a, b, c, p, q, r); }
  static void mm_nt(const float* a, const float* b, float* c, std::size_t p, std::size_t q, std::size_t r) { active().mm_nt_f32(a, b, c, p, q, r); }
  static void mm_tn(const float* a, const float* b, float* c, std::size_t p, std::size_t q, std::size_t r) { active().mm_tn_f32(a, b, c, p, q, r); }
  static void add(const float* a, const float* b, float* c, std::size_t n) { active().add_f32(a, b, c, n); }
  static void mul(const float* a, const float* b, float* c, std::size_t n) { active().mul_f32(a, b, c, n); }
  static void scale(const float* a, float s, float* c, std::size_t n) { active().scale_f32(a, s, c, n); }
  static void axpy(float a, const float* x, float* y, std::size_t n) { active().axpy_f32(a, x, y, n); }
  static void bias_rows(float* x, const float* b, std::size_t rows, std::size_t cols) { active().bias_rows_f32(x, b, rows, cols); }
  static double sum(const float* x, std::size_t n) { return active().sum_f32(x, n); }
  static double dot(const float* x, const float* y, std::size_t n) { return active().dot_f32(x, y, n); }
  static double sumsq(const float* x, std::size_t n) { return active().sumsq_f32(x, n); }
  static double sumsq_centered(const float* x, double mu, std::size_t n) { return active().sumsq_centered_f32(x, mu, n); }
};

template <> struct Dispatch<double> {
  static void mm_nn(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r) { active().mm_nn_f64(a, b, c, p, q, r); }
  static void mm_nt(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r) { active().mm_nt_f64(a, b, c, p, q, r); }
  static void mm_tn(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r) { active().mm_tn_f64(a, b, c, p, q, r); }
  static void add(const double* a, const double* b, double* c, std::size_t n) { active().add_f64(a, b, c, n); }
  static void mul(const double* a, const double* b, double* c, std::size_t n) { active().mul_f64(a, b, c, n); }
  static void scale(const double* a, double s, double* c, std::size_t n) { active().scale_f64(a, s, c, n); }
  static void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy_f64(a, x, y, n); }
  static void bias_rows(double* x, const double* b, std::size_t rows, std::size_t cols) { active().bias_rows_f64(x, b, rows, cols); }
  static double sum(const double* x, std::size_t n) { return active().sum_f64(x, n); }
  static double dot(const double* x, const double* y, std::size_t n) { return active().dot_f64(x, y, n); }
  static double sumsq(const double* x, std::size_t n) { return active().sumsq_f64(x, n); }
  static double sumsq_centered(const double* x, double mu, std::size_t n) { return active().sumsq_centered_f64(x, mu, n); }
};

}  // namespace perceiver::kern
