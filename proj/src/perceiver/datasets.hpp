#pragma once

// Desk-scale synthetic datasets. Every generator is a pure function of its
// seed (one serial generator drives the whole build), so datasets are
// bit-reproducible. Labels are solvable by construction:
//
//   sign_of_mean        — waveform with a +-uniform(0.15, 0.5) bias and
//                         sigma 0.25 noise; label = sign of the bias. 16
//                         segments of 16 samples, 3 Fourier bands -> C = 23.
//   procedural_shapes   — 8x8 renders of {filled square, hollow square, plus,
//                         X} with +-1 pixel jitter and sigma 0.08 noise,
//                         4 bands -> M = 64, C = 21.
//   two_class_clouds    — 64-point clouds on a sphere surface vs a cube
//                         surface, 8 bands at max resolution 1120 -> C = 51.
//   two_modality_parity — tiny video (sign bit in every pixel) fused with a
//                         tiny waveform (sign bit in every sample); label =
//                         XOR of the two bits, so neither modality suffices
//                         alone. Fused: 8 video rows + 4 audio rows = 12 rows
//                         of 25 channels.

#include "perceiver/byte_array.hpp"
#include "perceiver/common.hpp"
#include "perceiver/ingestion.hpp"
#include "perceiver/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace perceiver {

namespace dataset_detail {

inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace dataset_detail

// Optional knobs for the synthetic generators, used by config-driven sweeps.
// Zero means "keep the generator's own default". Changing num_bands changes the
// byte-row channel count, so model.input_channels = 0 (infer from data) pairs
// well with these.
struct GeneratorOverrides {
  std::size_t num_bands = 0;
  double max_resolution = 0.0;

  FourierConfig apply(FourierConfig cfg) const {
    if (num_bands != 0) cfg.num_bands = num_bands;
    if (max_resolution > 0.0) cfg.max_resolution = {max_resolution};
    return cfg;
  }
};

template <typename T>
Dataset<T> make_sign_of_mean(std::size_t train_n, std::size_t test_n, std::uint64_t seed,
                             const GeneratorOverrides& tweak = {}) {
  Dataset<T> data;
  data.name = "sign_of_mean";
  data.num_classes = 2;
  Rng rng(seed);
  FourierConfig cfg;
  cfg.num_bands = 3;
  cfg.max_resolution = {16.0};
  cfg = tweak.apply(cfg);
  auto make = [&]() {
    Example<T> ex;
    ex.label = rng.uniform() < 0.5 ? 0 : 1;
    const double bias = (ex.label == 1 ? 1.0 : -1.0) * rng.uniform(0.15, 0.5);
    std::vector<double> wave(256);
    for (double& v : wave) v = bias + rng.normal(0.0, 0.25);
    ex.input = audio_to_segments<T>(wave, 16, cfg);
    return ex;
  };
  for (std::size_t i = 0; i < train_n; ++i) data.train.push_back(make());
  for (std::size_t i = 0; i < test_n; ++i) data.test.push_back(make());
  return data;
}

// Renders one 8x8 grayscale shape with integer jitter in {-1, 0, 1}^2.
inline std::vector<double> render_shape8x8(std::size_t cls, int dy, int dx, Rng& rng,
                                           double noise_sigma = 0.08) {
  std::vector<double> img(8 * 8, 0.0);
  auto put = [&](int r, int c) {
    r += dy;
    c += dx;
    if (r >= 0 && r < 8 && c >= 0 && c < 8) img[static_cast<std::size_t>(r) * 8 + c] = 1.0;
  };
  switch (cls) {
    case 0:  // filled square
      for (int r = 2; r <= 5; ++r)
        for (int c = 2; c <= 5; ++c) put(r, c);
      break;
    case 1:  // hollow square
      for (int i = 2; i <= 5; ++i) {
        put(2, i);
        put(5, i);
        put(i, 2);
        put(i, 5);
      }
      break;
    case 2:  // plus
      for (int i = 2; i <= 5; ++i) {
        put(i, 3);
        put(i, 4);
        put(3, i);
        put(4, i);
      }
      break;
    case 3:  // X
      for (int i = 2; i <= 5; ++i) {
        put(i, i);
        put(i, 7 - i);
      }
      break;
    default:
      throw domain_error("render_shape8x8: class out of range");
  }
  for (double& v : img) v = dataset_detail::clamp01(v + rng.normal(0.0, noise_sigma));
  return img;
}

template <typename T>
Dataset<T> make_procedural_shapes(std::size_t train_n, std::size_t test_n, std::uint64_t seed,
                                  const GeneratorOverrides& tweak = {}) {
  Dataset<T> data;
  data.name = "procedural_shapes";
  data.num_classes = 4;
  Rng rng(seed);
  FourierConfig cfg;
  cfg.num_bands = 4;
  cfg.max_resolution = {8.0};
  cfg = tweak.apply(cfg);
  auto make = [&]() {
    Example<T> ex;
    ex.label = rng.uniform_index(4);
    const int dy = static_cast<int>(rng.uniform_index(3)) - 1;
    const int dx = static_cast<int>(rng.uniform_index(3)) - 1;
    std::vector<double> gray = render_shape8x8(ex.label, dy, dx, rng);
    std::vector<double> rgb(8 * 8 * 3);
    for (std::size_t i = 0; i < gray.size(); ++i)
      rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = gray[i];
    ex.input = image_to_bytes<T>(rgb, 8, 8, cfg, CropRect{0, 0, 8, 8});
    return ex;
  };
  for (std::size_t i = 0; i < train_n; ++i) data.train.push_back(make());
  for (std::size_t i = 0; i < test_n; ++i) data.test.push_back(make());
  return data;
}

template <typename T>
Dataset<T> make_two_class_clouds(std::size_t train_n, std::size_t test_n, std::uint64_t seed,
                                 const GeneratorOverrides& tweak = {},
                                 std::size_t points = 64) {
  Dataset<T> data;
  data.name = "two_class_clouds";
  data.num_classes = 2;
  Rng rng(seed);
  FourierConfig cfg = tweak.apply(pointcloud_fourier(8));
  auto make = [&]() {
    Example<T> ex;
    ex.label = rng.uniform() < 0.5 ? 0 : 1;
    std::vector<double> xyz(points * 3);
    for (std::size_t i = 0; i < points; ++i) {
      if (ex.label == 0) {  // sphere surface
        double v[3], norm = 0.0;
        do {
          norm = 0.0;
          for (double& x : v) {
            x = rng.normal(0.0, 1.0);
            norm += x * x;
          }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (std::size_t a = 0; a < 3; ++a) xyz[i * 3 + a] = v[a] / norm;
      } else {  // cube surface
        const std::size_t face = rng.uniform_index(6);
        double v[3] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                       face % 2 == 0 ? 1.0 : -1.0};
        const std::size_t axis = face / 2;
        xyz[i * 3 + axis] = v[2];
        xyz[i * 3 + (axis + 1) % 3] = v[0];
        xyz[i * 3 + (axis + 2) % 3] = v[1];
      }
    }
    ex.input = pointcloud_to_bytes<T>(xyz, cfg);
    return ex;
  };
  for (std::size_t i = 0; i < train_n; ++i) data.train.push_back(make());
  for (std::size_t i = 0; i < test_n; ++i) data.test.push_back(make());
  return data;
}

template <typename T>
Dataset<T> make_two_modality_parity(std::size_t train_n, std::size_t test_n,
                                    std::uint64_t seed,
                                    const GeneratorOverrides& tweak = {}) {
  Dataset<T> data;
  data.name = "two_modality_parity";
  data.num_classes = 2;
  Rng rng(seed);
  FourierConfig video_cfg;
  video_cfg.num_bands = 1;
  video_cfg.max_resolution = {2.0};
  video_cfg = tweak.apply(video_cfg);
  FourierConfig audio_cfg;
  audio_cfg.num_bands = 1;
  audio_cfg.max_resolution = {4.0};
  audio_cfg = tweak.apply(audio_cfg);
  // video: 2x4x4 RGB in 1x2x2 patches -> 8 rows of 12 content channels;
  // audio: 64 samples in 16-sample segments -> 4 rows of 16 content channels.
  const std::size_t video_cols = 12 + fourier_channels(3, video_cfg.num_bands,
                                                       video_cfg.concat_raw_position);
  const std::size_t audio_cols = 16 + fourier_channels(1, audio_cfg.num_bands,
                                                       audio_cfg.concat_raw_position);
  ModalityFuser<T> fuser({{"video", video_cols}, {"audio", audio_cols}}, 4, rng);
  auto make = [&]() {
    Example<T> ex;
    const bool video_bit = rng.uniform() < 0.5;
    const bool audio_bit = rng.uniform() < 0.5;
    ex.label = (video_bit != audio_bit) ? 1 : 0;
    std::vector<double> video(2 * 4 * 4 * 3);
    for (double& v : video)
      v = dataset_detail::clamp01(0.5 + (video_bit ? 0.3 : -0.3) + rng.normal(0.0, 0.05));
    std::vector<double> wave(64);
    for (double& v : wave) v = (audio_bit ? 0.5 : -0.5) + rng.normal(0.0, 0.05);
    std::vector<ByteArray<T>> parts;
    parts.push_back(video_to_patches<T>(video, 2, 4, 4, 1, 2, 2, video_cfg));
    parts.push_back(audio_to_segments<T>(wave, 16, audio_cfg));
    ex.input = fuser.fuse(parts);
    return ex;
  };
  for (std::size_t i = 0; i < train_n; ++i) data.train.push_back(make());
  for (std::size_t i = 0; i < test_n; ++i) data.test.push_back(make());
  return data;
}

template <typename T>
Dataset<T> make_synthetic(const std::string& kind, std::size_t train_n, std::size_t test_n,
                          std::uint64_t seed, const GeneratorOverrides& tweak = {}) {
  if (kind == "sign_of_mean") return make_sign_of_mean<T>(train_n, test_n, seed, tweak);
  if (kind == "procedural_shapes")
    return make_procedural_shapes<T>(train_n, test_n, seed, tweak);
  if (kind == "two_class_clouds")
    return make_two_class_clouds<T>(train_n, test_n, seed, tweak);
  if (kind == "two_modality_parity")
    return make_two_modality_parity<T>(train_n, test_n, seed, tweak);
  throw config_error("unknown synthetic dataset '" + kind + "'");
}

// ---- on-disk container ---------------------------------------------------------
// Directory layout: manifest.json + train.bin + test.bin, raw row-major values.
// All examples of a dataset share one shape and span layout, so the manifest
// stores them once alongside per-example labels.

namespace dataset_detail {

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

template <typename T>
void write_split(const std::string& path, const std::vector<Example<T>>& split) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("dataset: cannot open '" + path + "' for writing");
  for (const Example<T>& ex : split)
    out.write(reinterpret_cast<const char*>(ex.input.data.data()),
              static_cast<std::streamsize>(ex.input.data.size() * sizeof(T)));
  if (!out) throw std::runtime_error("dataset: write to '" + path + "' failed");
}

template <typename T>
std::vector<Example<T>> read_split(const std::string& path, const std::vector<std::size_t>& labels,
                                   std::size_t rows, std::size_t cols,
                                   const std::vector<ModalitySpan>& spans,
                                   const GridMeta& meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("dataset: cannot open '" + path + "'");
  std::vector<Example<T>> split;
  split.reserve(labels.size());
  for (std::size_t label : labels) {
    Example<T> ex;
    ex.label = label;
    ex.input.data = Tensor<T>({rows, cols});
    in.read(reinterpret_cast<char*>(ex.input.data.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(T)));
    if (!in) throw std::runtime_error("dataset: '" + path + "' is truncated");
    ex.input.spans = spans;
    ex.input.position_meta = meta;
    split.push_back(std::move(ex));
  }
  return split;
}

}  // namespace dataset_detail

template <typename T>
void save_dataset(const std::string& dir, const Dataset<T>& data, const std::string& kind,
                  std::uint64_t seed) {
  if (data.train.empty() && data.test.empty()) throw domain_error("save_dataset: empty dataset");
  const Example<T>& first = data.train.empty() ? data.test.front() : data.train.front();
  const std::size_t rows = first.input.rows(), cols = first.input.cols();
  auto check_uniform = [&](const std::vector<Example<T>>& split) {
    for (const Example<T>& ex : split)
      if (ex.input.rows() != rows || ex.input.cols() != cols)
        throw shape_error("save_dataset: container requires uniform example shapes");
  };
  check_uniform(data.train);
  check_uniform(data.test);
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["name"] = data.name;
  manifest["kind"] = kind;
  manifest["seed"] = seed;
  manifest["dtype"] = dataset_detail::dtype_name<T>();
  manifest["num_classes"] = data.num_classes;
  manifest["rows"] = rows;
  manifest["cols"] = cols;
  manifest["position_source"] = first.input.position_meta.source;
  manifest["position_axes"] = first.input.position_meta.axes;
  nlohmann::json spans = nlohmann::json::array();
  for (const ModalitySpan& s : first.input.spans)
    spans.push_back({{"name", s.name},
                     {"row_begin", s.row_begin},
                     {"row_end", s.row_end},
                     {"embed_begin", s.embed_begin},
                     {"embed_end", s.embed_end}});
  manifest["spans"] = spans;
  auto labels_of = [](const std::vector<Example<T>>& split) {
    std::vector<std::size_t> out;
    out.reserve(split.size());
    for (const Example<T>& ex : split) out.push_back(ex.label);
    return out;
  };
  manifest["train_labels"] = labels_of(data.train);
  manifest["test_labels"] = labels_of(data.test);
  std::ofstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("dataset: cannot write manifest in '" + dir + "'");
  mf << manifest.dump(2) << "\n";
  dataset_detail::write_split(dir + "/train.bin", data.train);
  dataset_detail::write_split(dir + "/test.bin", data.test);
}

template <typename T>
Dataset<T> load_dataset(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("dataset: cannot open '" + dir + "/manifest.json'");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  if (manifest.at("dtype").get<std::string>() != dataset_detail::dtype_name<T>())
    throw config_error("dataset: stored dtype is " +
                       manifest.at("dtype").get<std::string>());
  Dataset<T> data;
  data.name = manifest.at("name").get<std::string>();
  data.num_classes = manifest.at("num_classes").get<std::size_t>();
  const std::size_t rows = manifest.at("rows").get<std::size_t>();
  const std::size_t cols = manifest.at("cols").get<std::size_t>();
  GridMeta meta;
  meta.source = manifest.at("position_source").get<std::string>();
  meta.axes = manifest.at("position_axes").get<std::vector<std::size_t>>();
  std::vector<ModalitySpan> spans;
  for (const nlohmann::json& s : manifest.at("spans"))
    spans.push_back({s.at("name").get<std::string>(), s.at("row_begin").get<std::size_t>(),
                     s.at("row_end").get<std::size_t>(), s.at("embed_begin").get<std::size_t>(),
                     s.at("embed_end").get<std::size_t>()});
  data.train = dataset_detail::read_split<T>(
      dir + "/train.bin", manifest.at("train_labels").get<std::vector<std::size_t>>(), rows,
      cols, spans, meta);
  data.test = dataset_detail::read_split<T>(
      dir + "/test.bin", manifest.at("test_labels").get<std::vector<std::size_t>>(), rows,
      cols, spans, meta);
  return data;
}

}  // namespace perceiver
