#pragma once

// LAMB optimizer and the step-decay learning-rate schedule.
//
// LAMB = Adam-style bias-corrected moments plus a per-table trust ratio:
//   m <- b1 m + (1-b1) g          mhat = m / (1 - b1^t)
//   v <- b2 v + (1-b2) g^2        vhat = v / (1 - b2^t)
//   r = mhat / (sqrt(vhat) + eps) + weight_decay * theta
//   theta <- theta - lr * (|theta| / |r|) * r     (ratio 1 when either norm is 0)
// Optimizer state is kept in float64 regardless of the parameter dtype, and
// all norms go through the dispatched deterministic reductions. Forcing the
// trust ratio to 1 (with zero weight decay) reduces the update to Adam
// exactly, which the tests exploit as an independent oracle.

#include "perceiver/common.hpp"
#include "perceiver/kernels/kernel_table.hpp"
#include "perceiver/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace perceiver {

struct LambConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.0;
  bool force_trust_ratio_one = false;  // Adam-equivalence mode

  void validate() const {
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw config_error("lamb: betas must lie in [0, 1)");
    if (eps <= 0.0) throw config_error("lamb: eps must be positive");
    if (weight_decay < 0.0) throw config_error("lamb: weight decay must be non-negative");
  }
};

template <typename T>
class Lamb {
 public:
  explicit Lamb(ParamSet<T> params, LambConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    state_.reserve(params_.size());
    for (const NamedParam<T>& p : params_)
      state_.push_back({std::vector<double>(p.tensor.size(), 0.0),
                        std::vector<double>(p.tensor.size(), 0.0)});
  }

  // One update from the gradients currently stored on the parameters.
  void step(double lr) {
    if (lr < 0.0) throw domain_error("lamb: negative learning rate");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::vector<double> r;
    for (std::size_t p = 0; p < params_.size(); ++p) {
      Tensor<T>& theta = params_[p].tensor;
      const std::vector<T>& g = theta.grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(static_cast<double>(g[i])))
          throw numeric_error("lamb: non-finite gradient in '" + params_[p].name +
                              "' at flat index " + std::to_string(i));
      std::vector<double>& m = state_[p].m;
      std::vector<double>& v = state_[p].v;
      r.assign(g.size(), 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        r[i] = mhat / (std::sqrt(vhat) + cfg_.eps) +
               cfg_.weight_decay * static_cast<double>(theta.data()[i]);
      }
      double ratio = 1.0;
      if (!cfg_.force_trust_ratio_one) {
        const double wn = std::sqrt(kern::Dispatch<T>::sumsq(theta.data(), theta.size()));
        const double rn = std::sqrt(kern::Dispatch<double>::sumsq(r.data(), r.size()));
        if (wn > 0.0 && rn > 0.0) ratio = wn / rn;
      }
      for (std::size_t i = 0; i < g.size(); ++i)
        theta.data()[i] =
            static_cast<T>(static_cast<double>(theta.data()[i]) - lr * ratio * r[i]);
    }
  }

  void zero_grad() {
    for (NamedParam<T>& p : params_) p.tensor.zero_grad();
  }

  std::size_t step_count() const { return t_; }
  const LambConfig& config() const { return cfg_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  ParamSet<T> params_;
  LambConfig cfg_;
  std::vector<Moments> state_;
  std::size_t t_ = 0;
};

// Piecewise-constant learning rate: base_lr multiplied by decay_factor once
// per boundary epoch passed. Right-continuous: a step inside boundary epoch e
// already uses the decayed rate.
class StepDecaySchedule {
 public:
  StepDecaySchedule(double base_lr, double decay_factor,
                    std::vector<std::size_t> boundary_epochs, std::size_t steps_per_epoch)
      : base_lr_(base_lr), factor_(decay_factor), boundaries_(std::move(boundary_epochs)),
        steps_per_epoch_(steps_per_epoch) {
    if (!(base_lr_ > 0.0)) throw config_error("schedule: base learning rate must be positive");
    if (!(factor_ > 0.0) || factor_ > 1.0)
      throw config_error("schedule: decay factor must lie in (0, 1]");
    if (steps_per_epoch_ == 0) throw config_error("schedule: steps per epoch must be positive");
    for (std::size_t i = 1; i < boundaries_.size(); ++i)
      if (boundaries_[i] <= boundaries_[i - 1])
        throw config_error("schedule: boundary epochs must be strictly ascending");
  }

  std::size_t epoch_of(std::size_t step) const { return step / steps_per_epoch_; }

  double lr_at(std::size_t step) const {
    const std::size_t epoch = epoch_of(step);
    double lr = base_lr_;
    for (std::size_t b : boundaries_)
      if (epoch >= b) lr *= factor_;
    return lr;
  }

  double base_lr() const { return base_lr_; }

 private:
  double base_lr_, factor_;
  std::vector<std::size_t> boundaries_;
  std::size_t steps_per_epoch_;
};

}  // namespace perceiver
