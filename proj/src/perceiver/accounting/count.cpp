#include "perceiver/accounting/count.hpp"

#include "perceiver/flops.hpp"

#include <algorithm>
#include <cmath>

namespace perceiver::accounting {

namespace {

count_t linear_params(std::size_t cin, std::size_t cout) {
  return static_cast<count_t>(cin) * cout + cout;
}

count_t layer_norm_params(std::size_t width) { return 2 * static_cast<count_t>(width); }

count_t linear_flops(std::size_t rows, std::size_t cin, std::size_t cout) {
  return flops::matmul(rows, cin, cout) + flops::bias_rows(rows, cout);
}

// Mirrors qkv_attention: per head, score matmul, scale, softmax, value matmul.
count_t attention_flops(std::size_t queries, std::size_t keys, std::size_t dq, std::size_t dv,
                        std::size_t heads) {
  const std::size_t hq = dq / heads, hv = dv / heads;
  count_t per_head = flops::matmul(queries, hq, keys) + flops::elementwise(queries * keys) +
                     flops::softmax_rows(queries, keys) + flops::matmul(queries, keys, hv);
  return heads * per_head;
}

// Shared dense sublayer: layer norm, widening linear, GELU, projection, residual.
count_t dense_flops(std::size_t rows, std::size_t width, std::size_t hidden) {
  return flops::layer_norm(rows, width) + linear_flops(rows, width, hidden) +
         flops::gelu(rows * hidden) + linear_flops(rows, hidden, width) +
         flops::elementwise(rows * width);
}

count_t dense_params(std::size_t width, std::size_t hidden) {
  return layer_norm_params(width) + linear_params(width, hidden) +
         linear_params(hidden, width);
}

}  // namespace

count_t cross_attend_params(std::size_t latent_dim, std::size_t byte_channels,
                            std::size_t qk_channels, std::size_t dense_hidden) {
  return layer_norm_params(latent_dim) + layer_norm_params(byte_channels) +
         linear_params(latent_dim, qk_channels) +      // Q
         2 * linear_params(byte_channels, qk_channels) +  // K, V
         linear_params(qk_channels, latent_dim) +      // output projection
         dense_params(latent_dim, dense_hidden);
}

count_t self_attend_params(std::size_t latent_dim, std::size_t dense_hidden) {
  return layer_norm_params(latent_dim) + 3 * linear_params(latent_dim, latent_dim) +
         linear_params(latent_dim, latent_dim) + dense_params(latent_dim, dense_hidden);
}

count_t head_params(std::size_t latent_dim, std::size_t num_classes) {
  return linear_params(latent_dim, num_classes);
}

count_t cross_attend_flops(std::size_t latent_count, std::size_t latent_dim,
                           std::size_t byte_rows, std::size_t byte_channels,
                           std::size_t qk_channels, std::size_t heads,
                           std::size_t dense_hidden) {
  return flops::layer_norm(latent_count, latent_dim) +
         flops::layer_norm(byte_rows, byte_channels) +
         linear_flops(latent_count, latent_dim, qk_channels) +
         2 * linear_flops(byte_rows, byte_channels, qk_channels) +
         attention_flops(latent_count, byte_rows, qk_channels, qk_channels, heads) +
         linear_flops(latent_count, qk_channels, latent_dim) +
         flops::elementwise(latent_count * latent_dim) +
         dense_flops(latent_count, latent_dim, dense_hidden);
}

count_t self_attend_flops(std::size_t latent_count, std::size_t latent_dim, std::size_t heads,
                          std::size_t dense_hidden) {
  return flops::layer_norm(latent_count, latent_dim) +
         3 * linear_flops(latent_count, latent_dim, latent_dim) +
         attention_flops(latent_count, latent_count, latent_dim, latent_dim, heads) +
         linear_flops(latent_count, latent_dim, latent_dim) +
         flops::elementwise(latent_count * latent_dim) +
         dense_flops(latent_count, latent_dim, dense_hidden);
}

count_t head_flops(std::size_t latent_count, std::size_t latent_dim, std::size_t num_classes) {
  return flops::mean_over_index(latent_count, latent_dim) +
         linear_flops(1, latent_dim, num_classes);
}

CountReport count(const PerceiverConfig& cfg, std::size_t byte_rows) {
  cfg.validate();
  if (byte_rows == 0) throw domain_error("count: byte-array height must be positive");
  const std::size_t n = cfg.latent_count, d = cfg.latent_dim, c = cfg.input_channels;
  const std::size_t qk = cfg.resolved_qk();
  const std::size_t hidden = static_cast<std::size_t>(
      std::llround(static_cast<double>(d) * cfg.dense_widening));

  CountReport report;
  auto push = [&](std::string layer, count_t params, count_t fl) {
    report.rows.push_back({std::move(layer), params, fl});
    report.total_params += params;
    report.total_flops += fl;
  };

  push("latent", static_cast<count_t>(n) * d, 0);

  const count_t cross_p = cross_attend_params(d, c, qk, hidden);
  const count_t cross_f = cross_attend_flops(n, d, byte_rows, c, qk, cfg.cross_heads, hidden);
  for (std::size_t a = 0; a < cfg.num_cross_attends; ++a) {
    const bool owns = cfg.share_cross_after_first ? a <= 1 : true;
    std::string name = "cross_attend" + std::to_string(a);
    if (!owns) name += " (params shared with cross_attend1)";
    push(std::move(name), owns ? cross_p : 0, cross_f);
  }

  const count_t tower_p =
      static_cast<count_t>(cfg.self_attends_per_block) * self_attend_params(d, hidden);
  const count_t tower_f = static_cast<count_t>(cfg.self_attends_per_block) *
                          self_attend_flops(n, d, cfg.latent_heads, hidden);
  for (std::size_t t = 0; t < cfg.total_towers() && cfg.self_attends_per_block > 0; ++t) {
    const bool owns = cfg.tower_sharing == TowerSharing::shared ? t == 0 : true;
    std::string name = "latent_tower" + std::to_string(t);
    if (!owns) name += " (params shared with latent_tower0)";
    push(std::move(name), owns ? tower_p : 0, tower_f);
  }

  const count_t head_p = head_params(d, cfg.num_classes);
  push("classifier_head", head_p, head_flops(n, d, cfg.num_classes));
  report.params_excluding_head = report.total_params - head_p;
  return report;
}

count_t transformer_params(const TransformerConfig& cfg) {
  const std::size_t hidden = static_cast<std::size_t>(
      std::llround(static_cast<double>(cfg.channels) * cfg.dense_widening));
  return static_cast<count_t>(cfg.blocks) * self_attend_params(cfg.channels, hidden) +
         head_params(cfg.channels, cfg.num_classes);
}

count_t transformer_flops(const TransformerConfig& cfg, std::size_t byte_rows) {
  if (byte_rows == 0) throw domain_error("count: byte-array height must be positive");
  const std::size_t hidden = static_cast<std::size_t>(
      std::llround(static_cast<double>(cfg.channels) * cfg.dense_widening));
  return static_cast<count_t>(cfg.blocks) *
             self_attend_flops(byte_rows, cfg.channels, cfg.heads, hidden) +
         head_flops(byte_rows, cfg.channels, cfg.num_classes);
}

}  // namespace perceiver::accounting
