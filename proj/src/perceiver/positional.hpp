#pragma once

// Position encodings.
//
// Fourier features: for a coordinate x in [-1, 1] and a bank of K frequencies
// f_1..f_K spaced between 1 and mu/2, each dimension contributes
//   [sin(f_1 pi x) .. sin(f_K pi x), cos(f_1 pi x) .. cos(f_K pi x), x]
// (the trailing raw coordinate is optional), so a d-dimensional position maps
// to d(2K+1) channels (2dK without the raw coordinate). The highest band f_K
// equals mu/2 — the Nyquist frequency of a grid with mu samples per axis.
//
// Grids come in two flavors:
//   endpoint grids — n samples at -1 + 2i/(n-1); corners land exactly on
//     +-1 (pixel grids, crop-relative coordinates);
//   center grids — n samples at (2i+1)/n - 1; cell centers, used for patch
//     and segment positions so the first/last cells stay half a cell away
//     from the boundary.
// A single-sample axis uses coordinate 0 under either convention.

#include "perceiver/common.hpp"
#include "perceiver/ops.hpp"
#include "perceiver/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace perceiver {

struct FourierConfig {
  std::size_t num_bands = 64;          // K
  std::vector<double> max_resolution;  // mu: one entry shared, or one per dimension
  bool concat_raw_position = true;
  bool log_spacing = false;
};

inline std::size_t fourier_channels(std::size_t dims, std::size_t num_bands,
                                    bool concat_raw_position) {
  return dims * (2 * num_bands + (concat_raw_position ? 1 : 0));
}

// K frequencies with endpoints {1, mu/2}; linear spacing by default, geometric
// when log_spacing. K = 1 keeps only the top band: the ladder is anchored at
// the Nyquist frequency mu/2, the highest band the target resolution supports.
inline std::vector<double> band_frequencies(std::size_t num_bands, double max_resolution,
                                            bool log_spacing = false) {
  if (num_bands == 0) throw config_error("band_frequencies: need at least one band");
  if (max_resolution < 2.0)
    throw domain_error("band_frequencies: max resolution must be at least 2");
  std::vector<double> f(num_bands);
  const double top = max_resolution / 2.0;
  if (num_bands == 1) {
    f[0] = top;
    return f;
  }
  const double steps = static_cast<double>(num_bands - 1);
  for (std::size_t k = 0; k < num_bands; ++k) {
    const double t = static_cast<double>(k) / steps;
    f[k] = log_spacing ? std::pow(top, t) : 1.0 + t * (top - 1.0);
  }
  f.front() = 1.0;
  f.back() = top;  // pin endpoints against rounding
  return f;
}

// M positions in d dimensions, every coordinate in [-1, 1], row-major.
class PositionGrid {
 public:
  PositionGrid(std::vector<double> coords, std::size_t dims)
      : coords_(std::move(coords)), dims_(dims) {
    if (dims_ == 0) throw shape_error("PositionGrid: zero dimensions");
    if (coords_.size() % dims_ != 0)
      throw shape_error("PositionGrid: coordinate count not divisible by dims");
    for (double v : coords_)
      if (!(v >= -1.0 && v <= 1.0))
        throw domain_error("PositionGrid: coordinate outside [-1, 1]");
  }

  static PositionGrid endpoint(const std::vector<std::size_t>& axes) {
    return from_axes(axes, /*centers=*/false);
  }
  static PositionGrid centers(const std::vector<std::size_t>& axes) {
    return from_axes(axes, /*centers=*/true);
  }

  std::size_t count() const { return dims_ == 0 ? 0 : coords_.size() / dims_; }
  std::size_t dims() const { return dims_; }
  double at(std::size_t i, std::size_t d) const { return coords_[i * dims_ + d]; }
  const std::vector<double>& coords() const { return coords_; }

 private:
  static PositionGrid from_axes(const std::vector<std::size_t>& axes, bool centers) {
    if (axes.empty()) throw shape_error("PositionGrid: no axes");
    std::size_t m = 1;
    for (std::size_t n : axes) {
      if (n == 0) throw shape_error("PositionGrid: zero-length axis");
      m *= n;
    }
    const std::size_t d = axes.size();
    std::vector<double> coords(m * d);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t a = 0; a < d; ++a) {
        const std::size_t n = axes[a], j = idx[a];
        double v;
        if (n == 1)
          v = 0.0;
        else if (centers)
          v = (2.0 * static_cast<double>(j) + 1.0) / static_cast<double>(n) - 1.0;
        else
          v = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(n - 1);
        coords[i * d + a] = v;
      }
      for (std::size_t a = d; a-- > 0;) {  // row-major: last axis fastest
        if (++idx[a] < axes[a]) break;
        idx[a] = 0;
      }
    }
    return PositionGrid(std::move(coords), d);
  }

  std::vector<double> coords_;
  std::size_t dims_;
};

struct CropRect {
  std::size_t row = 0, col = 0, height = 0, width = 0;
};

// Coordinates for a crop of a larger 2-D grid. They are crop-relative: the
// crop's own corner pixels map to -1/+1 per dimension, so two crops of equal
// size taken anywhere in the source produce identical grids.
inline PositionGrid crop_coordinates(std::size_t source_height, std::size_t source_width,
                                     const CropRect& rect) {
  if (rect.height == 0 || rect.width == 0) throw domain_error("crop_coordinates: empty crop");
  if (rect.row + rect.height > source_height || rect.col + rect.width > source_width)
    throw domain_error("crop_coordinates: crop extends outside the source");
  return PositionGrid::endpoint({rect.height, rect.width});
}

// Fourier-feature matrix [M x d(2K+1)] (or [M x 2dK] without raw coordinates).
// max_resolution may hold a single shared value or one value per dimension.
template <typename T>
Tensor<T> fourier_features(const PositionGrid& grid, const FourierConfig& cfg) {
  const std::size_t d = grid.dims(), m = grid.count(), k = cfg.num_bands;
  if (cfg.max_resolution.empty())
    throw config_error("fourier_features: no max resolution given");
  if (cfg.max_resolution.size() != 1 && cfg.max_resolution.size() != d)
    throw config_error("fourier_features: need one max resolution, or one per dimension");
  std::vector<std::vector<double>> bands(d);
  for (std::size_t a = 0; a < d; ++a) {
    const double mu = cfg.max_resolution.size() == 1 ? cfg.max_resolution[0]
                                                     : cfg.max_resolution[a];
    bands[a] = band_frequencies(k, mu, cfg.log_spacing);
  }
  const std::size_t per_dim = 2 * k + (cfg.concat_raw_position ? 1 : 0);
  Tensor<T> out({m, d * per_dim});
  const double pi = 3.14159265358979323846264338327950288;
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * d * per_dim;
    for (std::size_t a = 0; a < d; ++a) {
      const double x = grid.at(i, a);
      T* ch = row + a * per_dim;
      for (std::size_t b = 0; b < k; ++b) ch[b] = static_cast<T>(std::sin(bands[a][b] * pi * x));
      for (std::size_t b = 0; b < k; ++b)
        ch[k + b] = static_cast<T>(std::cos(bands[a][b] * pi * x));
      if (cfg.concat_raw_position) ch[2 * k] = static_cast<T>(x);
    }
  }
  for (const T& v : out.values())
    if (!(v >= T(-1) && v <= T(1)))
      throw numeric_error("fourier_features: output left [-1, 1]");
  return out;
}

// Trainable position-encoding table, truncated normal(0, init_scale) with all
// samples rejected outside [-2, 2].
template <typename T>
Tensor<T> learned_encoding_init(std::size_t count, std::size_t width, double init_scale,
                                Rng& rng) {
  if (count == 0 || width == 0) throw shape_error("learned_encoding_init: empty table");
  if (init_scale <= 0.0) throw config_error("learned_encoding_init: scale must be positive");
  Tensor<T> table({count, width}, /*requires_grad=*/true);
  for (std::size_t i = 0; i < table.size(); ++i)
    table.data()[i] = static_cast<T>(rng.truncated_normal(0.0, init_scale, -2.0, 2.0));
  return table;
}

// Attach position channels after the feature channels: [M x Cf] ++ [M x Cp].
// Differentiable so learned encodings receive gradients; an empty encoding
// block returns the features unchanged.
template <typename T>
Tensor<T> concat_position(const Tensor<T>& features, const Tensor<T>& encodings,
                          Tape<T>* tape) {
  if (!encodings.defined() || encodings.size() == 0) return features;
  if (features.ndim() != 2 || encodings.ndim() != 2 ||
      features.shape()[0] != encodings.shape()[0])
    throw shape_error("concat_position: row counts differ");
  return concat_cols<T>({features, encodings}, tape);
}

}  // namespace perceiver
