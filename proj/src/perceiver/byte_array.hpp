#pragma once

// The byte array: the model's universal input format. Every modality is
// flattened to M rows of C channels (content features first, then position
// features, then — for fused multimodal inputs — a trainable modality
// embedding). Modality spans record which rows belong to which modality and
// which trailing columns hold its embedding, so modality-level operations
// (video dropout, per-modality permutation) can address them.

#include "perceiver/common.hpp"
#include "perceiver/tensor.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace perceiver {

struct ModalitySpan {
  std::string name;
  std::size_t row_begin = 0, row_end = 0;      // [begin, end) rows of this modality
  std::size_t embed_begin = 0, embed_end = 0;  // [begin, end) columns of its embedding
};

// Where the positions came from: grid axis lengths for images/video/audio
// (empty for point clouds and synthetic vector tasks). Attention maps over a
// grid source reshape to these axes for export.
struct GridMeta {
  std::vector<std::size_t> axes;
  std::string source;
};

template <typename T>
struct ByteArray {
  Tensor<T> data;  // M x C
  std::vector<ModalitySpan> spans;
  GridMeta position_meta;

  std::size_t rows() const { return data.defined() ? data.shape()[0] : 0; }
  std::size_t cols() const { return data.defined() ? data.shape()[1] : 0; }

  void validate() const {
    if (!data.defined() || data.ndim() != 2) throw shape_error("ByteArray: data must be M x C");
    if (spans.empty()) throw shape_error("ByteArray: no modality spans");
    std::size_t cursor = 0;
    for (const ModalitySpan& s : spans) {
      if (s.row_begin != cursor || s.row_end <= s.row_begin)
        throw shape_error("ByteArray: spans must partition the rows in order");
      if (s.embed_begin > s.embed_end || s.embed_end > cols())
        throw shape_error("ByteArray: embedding columns out of range");
      cursor = s.row_end;
    }
    if (cursor != rows()) throw shape_error("ByteArray: spans do not cover all rows");
  }

  const ModalitySpan& span(const std::string& name) const {
    for (const ModalitySpan& s : spans)
      if (s.name == name) return s;
    throw domain_error("ByteArray: unknown modality '" + name + "'");
  }

  bool has_span(const std::string& name) const {
    for (const ModalitySpan& s : spans)
      if (s.name == name) return true;
    return false;
  }

  // Deep copy (fresh tensor node) so augmentation can mutate per example.
  ByteArray clone() const {
    ByteArray out;
    if (data.defined()) out.data = Tensor<T>::from_values(data.shape(), data.values());
    out.spans = spans;
    out.position_meta = position_meta;
    return out;
  }

  // Convenience for single-modality arrays: one span, no embedding columns.
  static ByteArray single(Tensor<T> data, std::string modality, GridMeta meta) {
    ByteArray out;
    out.data = std::move(data);
    const std::size_t m = out.data.shape()[0], c = out.data.shape()[1];
    out.spans = {{std::move(modality), 0, m, c, c}};
    out.position_meta = std::move(meta);
    out.validate();
    return out;
  }
};

// With probability p per call (always, when force is set), zero every feature
// channel of the named modality's rows — the columns before its embedding —
// leaving the modality embedding intact so the model can still tell the rows'
// origin. Returns whether the modality was dropped. Evaluation paths simply
// never call this.
template <typename T>
bool apply_modality_dropout(ByteArray<T>& bytes, const std::string& modality, double p,
                            Rng& rng, bool force = false) {
  if (p < 0.0 || p > 1.0) throw domain_error("modality dropout: p must lie in [0, 1]");
  const ModalitySpan& s = bytes.span(modality);
  const bool drop = force || rng.uniform() < p;
  if (!drop) return false;
  const std::size_t c = bytes.cols();
  for (std::size_t i = s.row_begin; i < s.row_end; ++i) {
    T* row = bytes.data.data() + i * c;
    for (std::size_t j = 0; j < s.embed_begin; ++j) row[j] = T(0);
  }
  return true;
}

}  // namespace perceiver
