#pragma once

// Converters from raw modality data to byte arrays.
//
// Conventions, uniform across modalities:
//   - image/video content arrives as values in [0, 1] and is rescaled to
//     [-1, 1] (2v - 1); audio samples and spectrogram cells are taken as-is;
//   - pixel-style grids (images, spectrograms) use endpoint coordinates
//     (corners exactly at +-1); patch and segment positions use cell-center
//     coordinates;
//   - each row is [content channels | Fourier position channels]; position
//     channels depend only on the grid, never on the content.

#include "perceiver/byte_array.hpp"
#include "perceiver/common.hpp"
#include "perceiver/positional.hpp"
#include "perceiver/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace perceiver {

namespace ingest_detail {

inline void check_unit_interval(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!(x >= 0.0 && x <= 1.0))
      throw domain_error(std::string(what) + ": content values must lie in [0, 1]");
}

// Assemble [M x (Cf + Cp)] from content rows and a position grid.
template <typename T>
Tensor<T> with_positions(const std::vector<double>& content, std::size_t rows,
                         std::size_t content_channels, const PositionGrid& grid,
                         const FourierConfig& cfg) {
  Tensor<T> pos = fourier_features<T>(grid, cfg);
  const std::size_t cp = pos.shape()[1];
  Tensor<T> out({rows, content_channels + cp});
  for (std::size_t i = 0; i < rows; ++i) {
    T* dst = out.data() + i * (content_channels + cp);
    for (std::size_t j = 0; j < content_channels; ++j)
      dst[j] = static_cast<T>(content[i * content_channels + j]);
    const T* p = pos.data() + i * cp;
    for (std::size_t j = 0; j < cp; ++j) dst[content_channels + j] = p[j];
  }
  return out;
}

}  // namespace ingest_detail

// ---- images ------------------------------------------------------------------

// rgb: H*W*3 values in [0, 1], row-major (row, column, channel). Each pixel of
// the crop becomes one row: 3 rescaled RGB channels + crop-relative Fourier
// features (two different crops of equal size share identical position
// channels).
template <typename T>
ByteArray<T> image_to_bytes(const std::vector<double>& rgb, std::size_t height,
                            std::size_t width, const FourierConfig& cfg,
                            const CropRect& crop) {
  if (rgb.size() != height * width * 3) throw shape_error("image_to_bytes: size mismatch");
  ingest_detail::check_unit_interval(rgb, "image_to_bytes");
  PositionGrid grid = crop_coordinates(height, width, crop);
  const std::size_t m = crop.height * crop.width;
  std::vector<double> content(m * 3);
  for (std::size_t r = 0; r < crop.height; ++r)
    for (std::size_t c = 0; c < crop.width; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch)
        content[(r * crop.width + c) * 3 + ch] =
            2.0 * rgb[((crop.row + r) * width + (crop.col + c)) * 3 + ch] - 1.0;
  ByteArray<T> out = ByteArray<T>::single(
      ingest_detail::with_positions<T>(content, m, 3, grid, cfg), "image",
      GridMeta{{crop.height, crop.width}, "image crop"});
  return out;
}

// ---- permutation -------------------------------------------------------------

// One shared permutation per dataset: rows move as whole units, position
// features traveling with their content.
struct PermutationSpec {
  std::uint64_t seed = 0;
  std::vector<std::size_t> permutation;  // output row i = input row permutation[i]
};

inline PermutationSpec make_permutation(std::size_t m, std::uint64_t seed) {
  PermutationSpec spec;
  spec.seed = seed;
  spec.permutation.resize(m);
  for (std::size_t i = 0; i < m; ++i) spec.permutation[i] = i;
  Rng rng(seed);
  for (std::size_t i = m; i > 1; --i)
    std::swap(spec.permutation[i - 1], spec.permutation[rng.uniform_index(i)]);
  return spec;
}

inline PermutationSpec invert_permutation(const PermutationSpec& spec) {
  PermutationSpec inv;
  inv.seed = spec.seed;
  inv.permutation.resize(spec.permutation.size());
  for (std::size_t i = 0; i < spec.permutation.size(); ++i)
    inv.permutation[spec.permutation[i]] = i;
  return inv;
}

template <typename T>
ByteArray<T> permute_bytes(const ByteArray<T>& bytes, const PermutationSpec& spec) {
  bytes.validate();
  if (bytes.spans.size() != 1)
    throw domain_error("permute_bytes: only single-modality arrays can be permuted");
  const std::size_t m = bytes.rows(), c = bytes.cols();
  if (spec.permutation.size() != m)
    throw shape_error("permute_bytes: permutation length does not match row count");
  std::vector<bool> seen(m, false);
  for (std::size_t p : spec.permutation) {
    if (p >= m || seen[p]) throw domain_error("permute_bytes: not a bijection");
    seen[p] = true;
  }
  ByteArray<T> out = bytes.clone();
  for (std::size_t i = 0; i < m; ++i) {
    const T* src = bytes.data.data() + spec.permutation[i] * c;
    T* dst = out.data.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) dst[j] = src[j];
  }
  out.position_meta.source += " (rows permuted)";
  out.position_meta.axes.clear();  // grid structure no longer meaningful
  return out;
}

// ---- video -------------------------------------------------------------------

// video: Tv*H*W*3 values in [0, 1]. Each (pt x ph x pw) space-time patch
// becomes one row: pt*ph*pw*3 rescaled channels + 3-D Fourier features at the
// patch center (time, vertical, horizontal), centers in [-1, 1].
template <typename T>
ByteArray<T> video_to_patches(const std::vector<double>& video, std::size_t frames,
                              std::size_t height, std::size_t width, std::size_t pt,
                              std::size_t ph, std::size_t pw, const FourierConfig& cfg) {
  if (video.size() != frames * height * width * 3)
    throw shape_error("video_to_patches: size mismatch");
  if (pt == 0 || ph == 0 || pw == 0) throw shape_error("video_to_patches: empty patch");
  if (frames % pt != 0 || height % ph != 0 || width % pw != 0)
    throw shape_error("video_to_patches: patch must divide every axis");
  ingest_detail::check_unit_interval(video, "video_to_patches");
  const std::size_t nt = frames / pt, nh = height / ph, nw = width / pw;
  const std::size_t m = nt * nh * nw, cf = pt * ph * pw * 3;
  std::vector<double> content(m * cf);
  std::size_t row = 0;
  for (std::size_t bt = 0; bt < nt; ++bt)
    for (std::size_t bh = 0; bh < nh; ++bh)
      for (std::size_t bw = 0; bw < nw; ++bw, ++row) {
        std::size_t k = 0;
        for (std::size_t t = 0; t < pt; ++t)
          for (std::size_t y = 0; y < ph; ++y)
            for (std::size_t x = 0; x < pw; ++x)
              for (std::size_t ch = 0; ch < 3; ++ch, ++k)
                content[row * cf + k] =
                    2.0 * video[(((bt * pt + t) * height + (bh * ph + y)) * width +
                                 (bw * pw + x)) *
                                    3 +
                                ch] -
                    1.0;
      }
  PositionGrid grid = PositionGrid::centers({nt, nh, nw});
  return ByteArray<T>::single(ingest_detail::with_positions<T>(content, m, cf, grid, cfg),
                              "video", GridMeta{{nt, nh, nw}, "video patches"});
}

// ---- audio -------------------------------------------------------------------

// Raw waveform cut into length-L segments; each row = L samples (as-is) +
// 1-D Fourier features at the segment-center time. A trailing remainder is an
// error unless pad_remainder is set, in which case the last row is
// zero-padded and the padding is recorded in position_meta.
template <typename T>
ByteArray<T> audio_to_segments(const std::vector<double>& wave, std::size_t segment_len,
                               const FourierConfig& cfg, bool pad_remainder = false) {
  if (segment_len == 0) throw shape_error("audio_to_segments: segment length must be positive");
  if (wave.empty()) throw shape_error("audio_to_segments: empty waveform");
  for (double v : wave)
    if (!std::isfinite(v)) throw domain_error("audio_to_segments: non-finite sample");
  const bool padded = wave.size() % segment_len != 0;
  if (padded && !pad_remainder)
    throw domain_error("audio_to_segments: segment length must divide the sample count "
                       "(or enable remainder padding)");
  const std::size_t m = (wave.size() + segment_len - 1) / segment_len;
  std::vector<double> content(m * segment_len, 0.0);
  for (std::size_t i = 0; i < wave.size(); ++i) content[i] = wave[i];
  PositionGrid grid = PositionGrid::centers({m});
  std::string source = padded ? "audio segments (zero-padded)" : "audio segments";
  return ByteArray<T>::single(
      ingest_detail::with_positions<T>(content, m, segment_len, grid, cfg), "audio",
      GridMeta{{m}, std::move(source)});
}

// ---- spectrograms --------------------------------------------------------------

// Precomputed F x T array (computation out of scope); each cell becomes one
// row with a single content channel + 2-D Fourier features on an endpoint
// grid.
template <typename T>
ByteArray<T> spectrogram_to_bytes(const std::vector<double>& cells, std::size_t f_bins,
                                  std::size_t t_bins, const FourierConfig& cfg) {
  if (cells.size() != f_bins * t_bins || cells.empty())
    throw shape_error("spectrogram_to_bytes: size mismatch");
  for (double v : cells)
    if (!std::isfinite(v)) throw domain_error("spectrogram_to_bytes: non-finite cell");
  PositionGrid grid = PositionGrid::endpoint({f_bins, t_bins});
  return ByteArray<T>::single(
      ingest_detail::with_positions<T>(cells, f_bins * t_bins, 1, grid, cfg), "spectrogram",
      GridMeta{{f_bins, t_bins}, "spectrogram"});
}

// ---- point clouds ---------------------------------------------------------------

struct PointCloudAugment {
  bool per_point_scale = false;  // one scalar per point, uniform in [lo, hi]
  double scale_lo = 0.99, scale_hi = 1.01;
};

inline FourierConfig pointcloud_fourier(std::size_t num_bands) {
  FourierConfig cfg;
  cfg.num_bands = num_bands;
  cfg.max_resolution = {1120.0};
  return cfg;
}

// xyz: P*3 coordinates. Zero-center; optionally scale each point (then
// re-center); normalize by the maximum absolute coordinate so everything lands
// in [-1, 1]. Rows are pure position: 3-D Fourier features only.
template <typename T>
ByteArray<T> pointcloud_to_bytes(const std::vector<double>& xyz, const FourierConfig& cfg,
                                 const PointCloudAugment& aug = {}, Rng* rng = nullptr) {
  if (xyz.size() % 3 != 0 || xyz.empty()) throw shape_error("pointcloud_to_bytes: need P*3");
  const std::size_t p = xyz.size() / 3;
  std::vector<double> pts = xyz;
  auto center = [&] {
    double mean[3] = {0, 0, 0};
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t a = 0; a < 3; ++a) mean[a] += pts[i * 3 + a];
    for (double& m : mean) m /= static_cast<double>(p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t a = 0; a < 3; ++a) pts[i * 3 + a] -= mean[a];
  };
  center();
  if (aug.per_point_scale) {
    if (rng == nullptr)
      throw config_error("pointcloud_to_bytes: per-point scaling needs a generator");
    for (std::size_t i = 0; i < p; ++i) {
      const double s = rng->uniform(aug.scale_lo, aug.scale_hi);
      for (std::size_t a = 0; a < 3; ++a) pts[i * 3 + a] *= s;
    }
    center();
  }
  double max_abs = 0.0;
  for (double v : pts) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs == 0.0)
    throw domain_error("pointcloud_to_bytes: degenerate cloud (all points coincide)");
  for (double& v : pts) v /= max_abs;
  PositionGrid grid(pts, 3);
  Tensor<T> features = fourier_features<T>(grid, cfg);
  return ByteArray<T>::single(std::move(features), "pointcloud", GridMeta{{}, "point cloud"});
}

// ---- multimodal fusion -----------------------------------------------------------

// Pads every modality to a common channel count by appending a per-modality
// embedding vector to each of its rows, then stacks modalities along the row
// axis. The common width is max_i(C_i + min_embed), so the widest modality
// receives exactly min_embed embedding channels and narrower ones receive
// correspondingly more. Embedding tables are trainable tensors; fusion writes
// their current values.
template <typename T>
class ModalityFuser {
 public:
  ModalityFuser(const std::vector<std::pair<std::string, std::size_t>>& modality_channels,
                std::size_t min_embed, Rng& rng)
      : min_embed_(min_embed) {
    if (modality_channels.empty()) throw config_error("fuser: no modalities");
    if (min_embed == 0) throw config_error("fuser: embedding must have at least one channel");
    target_ = 0;
    for (const auto& [name, c] : modality_channels) {
      if (c == 0) throw config_error("fuser: modality '" + name + "' has zero channels");
      for (const Entry& e : entries_)
        if (e.name == name) throw config_error("fuser: duplicate modality '" + name + "'");
      entries_.push_back({name, c, Tensor<T>()});
      target_ = std::max(target_, c + min_embed);
    }
    for (Entry& e : entries_) {
      const std::size_t width = target_ - e.channels;
      e.embed = Tensor<T>({width}, /*requires_grad=*/true);
      for (std::size_t i = 0; i < width; ++i)
        e.embed.data()[i] = static_cast<T>(rng.truncated_normal(0.0, 0.02, -2.0, 2.0));
    }
  }

  std::size_t target_channels() const { return target_; }

  std::size_t embed_width(const std::string& name) const {
    return target_ - entry(name).channels;
  }

  ParamSet<T> params() const {
    ParamSet<T> out;
    for (const Entry& e : entries_) out.push_back({"fuser." + e.name + ".embed", e.embed});
    return out;
  }

  // parts must match the registered modalities in order, name and width.
  ByteArray<T> fuse(const std::vector<ByteArray<T>>& parts) const {
    if (parts.size() != entries_.size())
      throw shape_error("fuser: expected " + std::to_string(entries_.size()) + " modalities");
    std::size_t total_rows = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      parts[i].validate();
      if (parts[i].spans.size() != 1 || parts[i].spans[0].name != entries_[i].name)
        throw shape_error("fuser: modality order/name mismatch at position " +
                          std::to_string(i));
      if (parts[i].cols() != entries_[i].channels)
        throw shape_error("fuser: modality '" + entries_[i].name +
                          "' width does not match registration");
      total_rows += parts[i].rows();
    }
    ByteArray<T> out;
    out.data = Tensor<T>({total_rows, target_});
    std::string sources;
    std::size_t row = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Entry& e = entries_[i];
      const std::size_t m = parts[i].rows(), c = e.channels;
      for (std::size_t r = 0; r < m; ++r) {
        T* dst = out.data.data() + (row + r) * target_;
        const T* src = parts[i].data.data() + r * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] = src[j];
        for (std::size_t j = c; j < target_; ++j) dst[j] = e.embed.data()[j - c];
      }
      out.spans.push_back({e.name, row, row + m, c, target_});
      row += m;
      sources += (sources.empty() ? "" : " + ") + parts[i].position_meta.source;
    }
    out.position_meta = GridMeta{{}, "fused: " + sources};
    out.validate();
    return out;
  }

 private:
  struct Entry {
    std::string name;
    std::size_t channels;
    Tensor<T> embed;
  };

  const Entry& entry(const std::string& name) const {
    for (const Entry& e : entries_)
      if (e.name == name) return e;
    throw domain_error("fuser: unknown modality '" + name + "'");
  }

  std::vector<Entry> entries_;
  std::size_t min_embed_, target_ = 0;
};

}  // namespace perceiver
