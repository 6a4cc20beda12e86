#pragma once

// The full model: a small learned latent array repeatedly cross-attends into
// the (much larger) byte array, with towers of latent self-attention blocks
// in between, followed by a classification head that averages over the latent
// index dimension and applies a single linear projection.
//
// Depth is organized as: num_cross_attends cross-attends, each associated
// with blocks_per_cross latent towers of self_attends_per_block self-attention
// blocks. Arrangement "interleaved" runs [cross, towers] per attend;
// "at_start" runs every cross-attend first, then every tower.
//
// Weight sharing is by aliasing, not copying — a shared block is the same
// parameter object used at several depths, so gradients accumulate across
// uses exactly as in a recurrent network unrolled in depth:
//   - share_cross_after_first: cross-attends 2..n use one parameter set; the
//     first cross-attend always keeps its own.
//   - tower_sharing shared: every latent tower uses one per-block parameter
//     set (block j of every tower is the same object).

#include "perceiver/attention.hpp"
#include "perceiver/byte_array.hpp"
#include "perceiver/common.hpp"
#include "perceiver/ops.hpp"
#include "perceiver/tensor.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace perceiver {

enum class Arrangement { interleaved, at_start };
enum class TowerSharing { shared, unshared };
enum class LossMode { softmax, sigmoid };

struct PerceiverConfig {
  std::size_t input_channels = 0;  // C: byte-array width, position features included
  std::size_t num_classes = 0;
  std::size_t latent_count = 512;  // N
  std::size_t latent_dim = 1024;   // D
  std::size_t num_cross_attends = 8;
  std::size_t blocks_per_cross = 1;       // latent towers per cross-attend
  std::size_t self_attends_per_block = 6; // blocks per latent tower
  std::size_t cross_heads = 1;
  std::size_t latent_heads = 8;
  std::size_t qk_channels = 0;  // 0 selects min(input_channels, latent_dim)
  double dense_widening = 1.0;
  double latent_init_scale = 0.02;  // stddev of the latent's truncated-normal init
  bool share_cross_after_first = true;
  TowerSharing tower_sharing = TowerSharing::shared;
  Arrangement arrangement = Arrangement::interleaved;
  LossMode loss_mode = LossMode::softmax;

  std::size_t resolved_qk() const {
    return qk_channels != 0 ? qk_channels : std::min(input_channels, latent_dim);
  }
  std::size_t total_towers() const { return num_cross_attends * blocks_per_cross; }

  void validate() const {
    if (input_channels == 0) throw config_error("config: input_channels must be positive");
    if (num_classes == 0) throw config_error("config: num_classes must be positive");
    if (latent_count == 0 || latent_dim == 0)
      throw config_error("config: latent shape must be positive");
    if (num_cross_attends == 0)
      throw config_error("config: need at least one cross-attend");
    if (cross_heads == 0 || latent_heads == 0)
      throw config_error("config: head counts must be positive");
    if (resolved_qk() % cross_heads != 0)
      throw config_error("config: qk width must divide by cross_heads");
    if (self_attends_per_block > 0 && latent_dim % latent_heads != 0)
      throw config_error("config: latent_dim must divide by latent_heads");
    if (!(dense_widening > 0.0)) throw config_error("config: dense_widening must be positive");
    if (!(latent_init_scale > 0.0))
      throw config_error("config: latent_init_scale must be positive");
  }
};

template <typename T>
class Perceiver {
 public:
  Perceiver(const PerceiverConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    latent_ = Tensor<T>({cfg_.latent_count, cfg_.latent_dim}, /*requires_grad=*/true);
    for (std::size_t i = 0; i < latent_.size(); ++i)
      latent_.data()[i] =
          static_cast<T>(rng.truncated_normal(0.0, cfg_.latent_init_scale, -2.0, 2.0));

    const std::size_t unique_cross =
        cfg_.share_cross_after_first ? std::min<std::size_t>(cfg_.num_cross_attends, 2)
                                     : cfg_.num_cross_attends;
    crosses_.reserve(unique_cross);
    for (std::size_t i = 0; i < unique_cross; ++i) {
      std::string name = cfg_.share_cross_after_first
                             ? (i == 0 ? std::string("cross.first") : std::string("cross.shared"))
                             : "cross" + std::to_string(i);
      crosses_.push_back(AttentionBlock<T>::cross(std::move(name), cfg_.latent_dim,
                                                  cfg_.input_channels, cfg_.cross_heads,
                                                  cfg_.resolved_qk(), cfg_.dense_widening, rng));
    }

    const std::size_t unique_towers =
        cfg_.self_attends_per_block == 0
            ? 0
            : (cfg_.tower_sharing == TowerSharing::shared ? std::min<std::size_t>(
                                                                cfg_.total_towers(), 1)
                                                          : cfg_.total_towers());
    towers_.reserve(unique_towers);
    for (std::size_t t = 0; t < unique_towers; ++t) {
      std::vector<AttentionBlock<T>> tower;
      tower.reserve(cfg_.self_attends_per_block);
      for (std::size_t j = 0; j < cfg_.self_attends_per_block; ++j) {
        std::string name = cfg_.tower_sharing == TowerSharing::shared
                               ? "tower.block" + std::to_string(j)
                               : "tower" + std::to_string(t) + ".block" + std::to_string(j);
        tower.push_back(AttentionBlock<T>::self_attend(std::move(name), cfg_.latent_dim,
                                                       cfg_.latent_heads, cfg_.dense_widening,
                                                       rng));
      }
      towers_.push_back(std::move(tower));
    }

    head_w_ = Tensor<T>({cfg_.latent_dim, cfg_.num_classes}, /*requires_grad=*/true);
    for (std::size_t i = 0; i < head_w_.size(); ++i)
      head_w_.data()[i] = static_cast<T>(rng.truncated_normal(0.0, 0.02, -2.0, 2.0));
    head_b_ = Tensor<T>({cfg_.num_classes}, /*requires_grad=*/true);
    captured_.resize(cfg_.num_cross_attends);
  }

  // bytes: [M x input_channels] -> logits [1 x num_classes].
  Tensor<T> forward(const Tensor<T>& bytes, Tape<T>* tape) {
    if (bytes.ndim() != 2 || bytes.shape()[1] != cfg_.input_channels)
      throw shape_error("forward: byte array width does not match the built model");
    Tensor<T> x = latent_;
    auto run_cross = [&](std::size_t a) {
      AttentionBlock<T>& blk = crosses_[cross_param_index(a)];
      x = blk.forward(x, bytes, tape);
      if (capture_) captured_[a] = blk.last_maps();
    };
    auto run_tower = [&](std::size_t t) {
      if (cfg_.self_attends_per_block == 0) return;
      for (AttentionBlock<T>& blk : towers_[tower_param_index(t)]) x = blk.forward(x, tape);
    };
    if (cfg_.arrangement == Arrangement::interleaved) {
      for (std::size_t a = 0; a < cfg_.num_cross_attends; ++a) {
        run_cross(a);
        for (std::size_t b = 0; b < cfg_.blocks_per_cross; ++b)
          run_tower(a * cfg_.blocks_per_cross + b);
      }
    } else {
      for (std::size_t a = 0; a < cfg_.num_cross_attends; ++a) run_cross(a);
      for (std::size_t t = 0; t < cfg_.total_towers(); ++t) run_tower(t);
    }
    Tensor<T> pooled = mean_over_index(x, tape);  // average latents, then project
    return linear(pooled, head_w_, head_b_, tape);
  }

  Tensor<T> forward(const ByteArray<T>& bytes, Tape<T>* tape) {
    return forward(bytes.data, tape);
  }

  Tensor<T> loss(const Tensor<T>& logits, std::size_t label, Tape<T>* tape) const {
    if (cfg_.loss_mode == LossMode::softmax) return softmax_cross_entropy(logits, label, tape);
    std::vector<double> targets(cfg_.num_classes, 0.0);
    if (label >= cfg_.num_classes) throw domain_error("loss: label out of range");
    targets[label] = 1.0;
    return sigmoid_cross_entropy(logits, targets, tape);
  }

  // Attention-map capture across cross-attends (position a = a-th cross-attend
  // executed, regardless of parameter sharing).
  void set_capture(bool on) {
    capture_ = on;
    for (AttentionBlock<T>& c : crosses_) c.set_capture(on);
    if (!on)
      for (AttentionMaps<T>& m : captured_) m = AttentionMaps<T>{};
  }
  const AttentionMaps<T>& cross_maps(std::size_t position) const {
    if (!capture_) throw state_error("cross_maps: attention-map capture is disabled");
    if (position >= captured_.size() || captured_[position].scores.empty())
      throw state_error("cross_maps: no maps captured at this position yet");
    return captured_[position];
  }

  ParamSet<T> params() const {
    ParamSet<T> out;
    out.push_back({"latent", latent_});
    for (const AttentionBlock<T>& c : crosses_) c.params(out);
    for (const std::vector<AttentionBlock<T>>& tower : towers_)
      for (const AttentionBlock<T>& blk : tower) blk.params(out);
    out.push_back({"head.w", head_w_});
    out.push_back({"head.b", head_b_});
    return out;
  }

  std::size_t registered_param_count() const {
    std::size_t n = 0;
    for (const NamedParam<T>& p : params()) n += p.tensor.size();
    return n;
  }

  const PerceiverConfig& config() const { return cfg_; }
  const Tensor<T>& latent() const { return latent_; }

 private:
  std::size_t cross_param_index(std::size_t a) const {
    return cfg_.share_cross_after_first ? (a == 0 ? 0 : std::min<std::size_t>(1, crosses_.size() - 1))
                                        : a;
  }
  std::size_t tower_param_index(std::size_t t) const {
    return cfg_.tower_sharing == TowerSharing::shared ? 0 : t;
  }

  PerceiverConfig cfg_;
  Tensor<T> latent_, head_w_, head_b_;
  std::vector<AttentionBlock<T>> crosses_;
  std::vector<std::vector<AttentionBlock<T>>> towers_;
  bool capture_ = false;
  std::vector<AttentionMaps<T>> captured_;
};

// Order-sensitive reference classifier used to demonstrate that permutation
// invariance is an architectural property rather than a triviality: two
// width-3 convolutions over the row sequence, GELU, mean pool, linear. Fixed
// random weights, forward only.
template <typename T>
class ConvProbe {
 public:
  ConvProbe(std::size_t in_channels, std::size_t hidden, std::size_t classes, Rng& rng)
      : cin_(in_channels), hidden_(hidden), classes_(classes) {
    auto fill = [&](std::vector<double>& w, std::size_t n, double fan_in) {
      w.resize(n);
      for (double& v : w) v = rng.normal(0.0, 1.0 / std::sqrt(fan_in));
    };
    fill(w1_, 3 * cin_ * hidden_, 3.0 * static_cast<double>(cin_));
    fill(w2_, 3 * hidden_ * hidden_, 3.0 * static_cast<double>(hidden_));
    fill(w3_, hidden_ * classes_, static_cast<double>(hidden_));
  }

  std::vector<double> forward(const Tensor<T>& bytes) const {
    if (bytes.ndim() != 2 || bytes.shape()[1] != cin_)
      throw shape_error("ConvProbe: byte array width mismatch");
    const std::size_t m = bytes.shape()[0];
    std::vector<double> h1(m * hidden_), h2(m * hidden_);
    conv3(bytes.data(), cin_, m, w1_, h1);
    gelu_inplace(h1);
    conv3(h1.data(), hidden_, m, w2_, h2);
    gelu_inplace(h2);
    std::vector<double> pooled(hidden_, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < hidden_; ++j) pooled[j] += h2[i * hidden_ + j];
    for (double& v : pooled) v /= static_cast<double>(m);
    std::vector<double> logits(classes_, 0.0);
    for (std::size_t j = 0; j < hidden_; ++j)
      for (std::size_t c = 0; c < classes_; ++c) logits[c] += pooled[j] * w3_[j * classes_ + c];
    return logits;
  }

 private:
  template <typename Src>
  void conv3(const Src* x, std::size_t cin, std::size_t m, const std::vector<double>& w,
             std::vector<double>& out) const {
    const std::size_t cout = hidden_;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t o = 0; o < cout; ++o) {
        double acc = 0.0;
        for (int tap = -1; tap <= 1; ++tap) {
          const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i) + tap;
          if (r < 0 || r >= static_cast<std::ptrdiff_t>(m)) continue;  // zero padding
          const std::size_t wbase = static_cast<std::size_t>(tap + 1) * cin * cout;
          for (std::size_t j = 0; j < cin; ++j)
            acc += static_cast<double>(x[static_cast<std::size_t>(r) * cin + j]) *
                   w[wbase + j * cout + o];
        }
        out[i * cout + o] = acc;
      }
  }

  static void gelu_inplace(std::vector<double>& v) {
    const double inv_sqrt2 = 0.70710678118654752440084436210485;
    for (double& x : v) x = x * 0.5 * (1.0 + std::erf(x * inv_sqrt2));
  }

  std::size_t cin_, hidden_, classes_;
  std::vector<double> w1_, w2_, w3_;
};

}  // namespace perceiver
