#pragma once

// Shared plumbing: error taxonomy, deterministic RNG, small helpers.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace perceiver {

// ---- error taxonomy -------------------------------------------------------
//
// shape_error   incompatible tensor dimensions
// config_error  invalid or inconsistent configuration / unknown config key
// domain_error  value outside the documented domain (e.g. coordinate > 1)
// state_error   operation invalid in the current state (e.g. tape reuse)
// numeric_error non-finite value produced by an operation

struct shape_error : std::invalid_argument {
  explicit shape_error(const std::string& msg) : std::invalid_argument(msg) {}
};

struct config_error : std::invalid_argument {
  explicit config_error(const std::string& msg) : std::invalid_argument(msg) {}
};

struct domain_error : std::invalid_argument {
  explicit domain_error(const std::string& msg) : std::invalid_argument(msg) {}
};

struct state_error : std::logic_error {
  explicit state_error(const std::string& msg) : std::logic_error(msg) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---- deterministic RNG -----------------------------------------------------
//
// mt19937_64 is bit-standardized; the std::*_distribution adaptors are not.
// The transforms below are spelled out so a seed reproduces the same stream
// on every toolchain.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1): 53 mantissa bits of one draw.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n): rejection to kill modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw domain_error("Rng::uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller on fresh uniforms (no cached spare, so the
  // stream position is a pure function of the number of calls).
  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Normal with hard truncation bounds (absolute, not sigma-relative),
  // resampled until inside. Used by learned-encoding / latent init.
  double truncated_normal(double mean, double stddev, double lo, double hi) {
    if (!(lo < hi)) throw domain_error("truncated_normal: empty interval");
    double x;
    do {
      x = normal(mean, stddev);
    } while (x < lo || x > hi);
    return x;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace perceiver
