#pragma once

// QKV attention and the two building blocks of the model:
//   cross-attention  — queries projected from the latent array, keys/values
//     from the byte array; query/key/value width defaults to the minimum of
//     the two input widths; single head by default;
//   latent self-attention — pre-layer-norm multi-head attention over the
//     latent array (one layer norm feeding Q, K and V), eight heads by
//     default.
// Both blocks append a dense sublayer (layer norm -> linear -> GELU ->
// linear) whose hidden width equals the block width times a widening factor
// (1 by default: no bottleneck and no expansion), and both use residual
// connections onto the latent. No masks and no dropout anywhere.
//
// Attention-map capture stores the raw query-key dot products (before the
// 1/sqrt(head width) scale and before the softmax), one N x M map per head.

#include "perceiver/common.hpp"
#include "perceiver/ops.hpp"
#include "perceiver/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace perceiver {

template <typename T>
struct AttentionMaps {
  std::size_t heads = 0, queries = 0, keys = 0;
  std::vector<T> scores;  // heads * queries * keys, raw QK^T per head

  const T* head(std::size_t h) const { return scores.data() + h * queries * keys; }
};

// softmax((Q K^T) / sqrt(Dq/heads)) V per head, heads concatenated.
// q: [N x Dq], k: [M x Dq], v: [M x Dv]; Dq and Dv must divide by heads.
template <typename T>
Tensor<T> qkv_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                        std::size_t heads, Tape<T>* tape,
                        AttentionMaps<T>* capture = nullptr) {
  if (heads == 0) throw config_error("qkv_attention: need at least one head");
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2)
    throw shape_error("qkv_attention: operands must be rank-2");
  const std::size_t n = q.shape()[0], dq = q.shape()[1];
  const std::size_t m = k.shape()[0], dv = v.shape()[1];
  if (k.shape()[1] != dq) throw shape_error("qkv_attention: Q and K widths differ");
  if (v.shape()[0] != m) throw shape_error("qkv_attention: K and V row counts differ");
  if (dq % heads != 0 || dv % heads != 0)
    throw config_error("qkv_attention: widths must divide by the head count");
  const std::size_t hq = dq / heads, hv = dv / heads;
  if (capture != nullptr) {
    capture->heads = heads;
    capture->queries = n;
    capture->keys = m;
    capture->scores.assign(heads * n * m, T(0));
  }
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hq)));
  std::vector<Tensor<T>> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor<T> qh = slice_cols(q, h * hq, (h + 1) * hq, tape);
    Tensor<T> kh = slice_cols(k, h * hq, (h + 1) * hq, tape);
    Tensor<T> vh = slice_cols(v, h * hv, (h + 1) * hv, tape);
    Tensor<T> scores = matmul_nt(qh, kh, tape);  // [N x M]
    if (capture != nullptr) {
      T* dst = capture->scores.data() + h * n * m;
      const std::vector<T>& src = scores.values();
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
    }
    Tensor<T> probs = softmax_rows(scale(scores, inv_sqrt, tape), tape);
    head_outputs.push_back(matmul(probs, vh, tape));  // [N x Hv]
  }
  return heads == 1 ? head_outputs[0] : concat_cols(head_outputs, tape);
}

// One attention block (attention sublayer + dense sublayer, both residual).
// Construct through AttentionBlock::cross or AttentionBlock::self_attend.
template <typename T>
class AttentionBlock {
 public:
  static constexpr double kLayerNormEps = 1e-5;

  // Cross-attention: query input [N x query_dim], key/value input
  // [M x kv_channels]. qk_channels = 0 selects min(query_dim, kv_channels).
  static AttentionBlock cross(std::string name, std::size_t query_dim,
                              std::size_t kv_channels, std::size_t heads,
                              std::size_t qk_channels, double dense_widening, Rng& rng) {
    return AttentionBlock(std::move(name), /*self_mode=*/false, query_dim, kv_channels,
                          heads, qk_channels, dense_widening, rng);
  }

  // Self-attention over [N x dim]: one layer norm feeds Q, K and V.
  static AttentionBlock self_attend(std::string name, std::size_t dim, std::size_t heads,
                                    double dense_widening, Rng& rng) {
    return AttentionBlock(std::move(name), /*self_mode=*/true, dim, dim, heads, dim,
                          dense_widening, rng);
  }

  Tensor<T> forward(const Tensor<T>& query_input, const Tensor<T>& kv_input, Tape<T>* tape) {
    if (self_mode_) throw state_error(name_ + ": self-attention takes a single input");
    return run(query_input, kv_input, tape);
  }

  Tensor<T> forward(const Tensor<T>& input, Tape<T>* tape) {
    if (!self_mode_) throw state_error(name_ + ": cross-attention takes two inputs");
    return run(input, input, tape);
  }

  void set_capture(bool on) {
    capture_ = on;
    if (!on) has_maps_ = false;
  }
  bool capture_enabled() const { return capture_; }

  const AttentionMaps<T>& last_maps() const {
    if (!capture_) throw state_error(name_ + ": attention-map capture is disabled");
    if (!has_maps_) throw state_error(name_ + ": no attention maps captured yet");
    return maps_;
  }

  void params(ParamSet<T>& out) const {
    auto put = [&](const char* suffix, const Tensor<T>& t) {
      out.push_back({name_ + "." + suffix, t});
    };
    put("ln_q.gain", ln_q_gain_);
    put("ln_q.bias", ln_q_bias_);
    if (!self_mode_) {
      put("ln_kv.gain", ln_kv_gain_);
      put("ln_kv.bias", ln_kv_bias_);
    }
    put("q.w", wq_);
    put("q.b", bq_);
    put("k.w", wk_);
    put("k.b", bk_);
    put("v.w", wv_);
    put("v.b", bv_);
    put("out.w", wo_);
    put("out.b", bo_);
    put("dense.ln.gain", ln_d_gain_);
    put("dense.ln.bias", ln_d_bias_);
    put("dense.w1", w1_);
    put("dense.b1", b1_);
    put("dense.w2", w2_);
    put("dense.b2", b2_);
  }

  const std::string& name() const { return name_; }
  std::size_t qk_channels() const { return qk_; }
  std::size_t heads() const { return heads_; }
  std::size_t dense_hidden() const { return hidden_; }
  bool is_self_attention() const { return self_mode_; }

 private:
  AttentionBlock(std::string name, bool self_mode, std::size_t query_dim,
                 std::size_t kv_channels, std::size_t heads, std::size_t qk_channels,
                 double dense_widening, Rng& rng)
      : name_(std::move(name)), self_mode_(self_mode), query_dim_(query_dim),
        kv_channels_(kv_channels), heads_(heads),
        qk_(qk_channels == 0 ? std::min(query_dim, kv_channels) : qk_channels),
        hidden_(static_cast<std::size_t>(std::llround(
            static_cast<double>(query_dim) * dense_widening))) {
    if (query_dim == 0 || kv_channels == 0) throw shape_error(name_ + ": zero-width input");
    if (heads == 0) throw config_error(name_ + ": need at least one head");
    if (qk_ % heads != 0)
      throw config_error(name_ + ": qk width must divide by the head count");
    if (dense_widening <= 0.0 || hidden_ == 0)
      throw config_error(name_ + ": dense widening must be positive");
    ln_q_gain_ = Tensor<T>::full({query_dim_}, T(1), true);
    ln_q_bias_ = Tensor<T>({query_dim_}, true);
    if (!self_mode_) {
      ln_kv_gain_ = Tensor<T>::full({kv_channels_}, T(1), true);
      ln_kv_bias_ = Tensor<T>({kv_channels_}, true);
    }
    wq_ = init_weight(query_dim_, qk_, rng);
    bq_ = Tensor<T>({qk_}, true);
    wk_ = init_weight(kv_channels_, qk_, rng);
    bk_ = Tensor<T>({qk_}, true);
    wv_ = init_weight(kv_channels_, qk_, rng);
    bv_ = Tensor<T>({qk_}, true);
    wo_ = init_weight(qk_, query_dim_, rng);
    bo_ = Tensor<T>({query_dim_}, true);
    ln_d_gain_ = Tensor<T>::full({query_dim_}, T(1), true);
    ln_d_bias_ = Tensor<T>({query_dim_}, true);
    w1_ = init_weight(query_dim_, hidden_, rng);
    b1_ = Tensor<T>({hidden_}, true);
    w2_ = init_weight(hidden_, query_dim_, rng);
    b2_ = Tensor<T>({query_dim_}, true);
  }

  static Tensor<T> init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor<T> w({fan_in, fan_out}, true);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.size(); ++i)
      w.data()[i] = static_cast<T>(rng.truncated_normal(0.0, scale, -2.0, 2.0));
    return w;
  }

  Tensor<T> run(const Tensor<T>& query_input, const Tensor<T>& kv_input, Tape<T>* tape) {
    if (query_input.ndim() != 2 || kv_input.ndim() != 2)
      throw shape_error(name_ + ": inputs must be rank-2");
    if (query_input.shape()[1] != query_dim_)
      throw shape_error(name_ + ": query input width mismatch");
    if (kv_input.shape()[1] != kv_channels_)
      throw shape_error(name_ + ": key/value input width mismatch");
    Tensor<T> xq = layer_norm(query_input, ln_q_gain_, ln_q_bias_, kLayerNormEps, tape);
    Tensor<T> xkv = self_mode_
                        ? xq
                        : layer_norm(kv_input, ln_kv_gain_, ln_kv_bias_, kLayerNormEps, tape);
    Tensor<T> q = linear(xq, wq_, bq_, tape);
    Tensor<T> k = linear(xkv, wk_, bk_, tape);
    Tensor<T> v = linear(xkv, wv_, bv_, tape);
    AttentionMaps<T>* cap = capture_ ? &maps_ : nullptr;
    Tensor<T> attended = qkv_attention(q, k, v, heads_, tape, cap);
    if (capture_) has_maps_ = true;
    Tensor<T> projected = linear(attended, wo_, bo_, tape);
    Tensor<T> residual = add(query_input, projected, tape);
    Tensor<T> xd = layer_norm(residual, ln_d_gain_, ln_d_bias_, kLayerNormEps, tape);
    Tensor<T> hidden = gelu(linear(xd, w1_, b1_, tape), tape);
    Tensor<T> dense_out = linear(hidden, w2_, b2_, tape);
    return add(residual, dense_out, tape);
  }

  std::string name_;
  bool self_mode_;
  std::size_t query_dim_, kv_channels_, heads_, qk_, hidden_;
  bool capture_ = false;
  bool has_maps_ = false;
  AttentionMaps<T> maps_;

  Tensor<T> ln_q_gain_, ln_q_bias_, ln_kv_gain_, ln_kv_bias_;
  Tensor<T> wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  Tensor<T> ln_d_gain_, ln_d_bias_, w1_, b1_, w2_, b2_;
};

}  // namespace perceiver
