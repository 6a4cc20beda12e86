#pragma once

// Closed-form parameter and FLOP accounting for any model configuration.
//
// The FLOP count mirrors the forward pass op for op under the convention in
// flops.hpp (unfused: multiply and accumulate are separate operations), so an
// instrumented execution of the real model must tally exactly the same total.
// The classification head is included; generating position encodings is
// treated as data preparation and excluded. The fused convention (multiply-
// accumulate as one operation) is reported as total/2.
//
// Parameter totals are reported twice: with and without the classification
// head, since depth ablations are commonly quoted without the head's
// contribution.

#include "perceiver/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace perceiver::accounting {

using count_t = std::uint64_t;

struct CountRow {
  std::string layer;
  count_t params = 0;  // 0 on rows whose parameters alias an earlier row
  count_t flops = 0;
};

struct CountReport {
  std::vector<CountRow> rows;
  count_t total_params = 0;
  count_t params_excluding_head = 0;
  count_t total_flops = 0;  // unfused convention, head included

  count_t fused_flops() const { return total_flops / 2; }
};

// Per-block closed forms (exposed for the oracle tests).
count_t cross_attend_params(std::size_t latent_dim, std::size_t byte_channels,
                            std::size_t qk_channels, std::size_t dense_hidden);
count_t self_attend_params(std::size_t latent_dim, std::size_t dense_hidden);
count_t head_params(std::size_t latent_dim, std::size_t num_classes);
count_t cross_attend_flops(std::size_t latent_count, std::size_t latent_dim,
                           std::size_t byte_rows, std::size_t byte_channels,
                           std::size_t qk_channels, std::size_t heads,
                           std::size_t dense_hidden);
count_t self_attend_flops(std::size_t latent_count, std::size_t latent_dim, std::size_t heads,
                          std::size_t dense_hidden);
count_t head_flops(std::size_t latent_count, std::size_t latent_dim, std::size_t num_classes);

// Full model: parameters and per-forward FLOPs at byte-array height M.
CountReport count(const PerceiverConfig& cfg, std::size_t byte_rows);

// Reference point for scaling comparisons: a Transformer applied directly to
// the byte array (self-attention blocks over M rows), plus a mean-pool head.
struct TransformerConfig {
  std::size_t channels = 64;
  std::size_t heads = 4;
  std::size_t blocks = 2;
  std::size_t num_classes = 2;
  double dense_widening = 1.0;
};
count_t transformer_params(const TransformerConfig& cfg);
count_t transformer_flops(const TransformerConfig& cfg, std::size_t byte_rows);

}  // namespace perceiver::accounting
