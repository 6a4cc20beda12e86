// Acceptance gate. Runs the ten release criteria end to end against the real
// library and the bundled configs, printing exactly one line per criterion:
//
//   criterion N: PASS — <measurements> [elapsed, budget]
//   criterion N: FAIL — <what broke>
//
// Usage: acceptance [--criterion N]   (default: run all ten)
// Exit code 0 when every executed criterion passes, 1 otherwise.
//
// This binary is deliberately self-contained (no test framework): each
// criterion returns a verdict plus a one-line summary of the measured
// quantities so the printed output is the complete evidence.

#include "perceiver/accounting/count.hpp"
#include "perceiver/byte_array.hpp"
#include "perceiver/cli/commands.hpp"
#include "perceiver/common.hpp"
#include "perceiver/datasets.hpp"
#include "perceiver/flops.hpp"
#include "perceiver/ingestion.hpp"
#include "perceiver/io/config_file.hpp"
#include "perceiver/model.hpp"
#include "perceiver/optim.hpp"
#include "perceiver/positional.hpp"
#include "perceiver/tensor.hpp"
#include "perceiver/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace {

using perceiver::Arrangement;
using perceiver::ByteArray;
using perceiver::ConvProbe;
using perceiver::Dataset;
using perceiver::FourierConfig;
using perceiver::Lamb;
using perceiver::LambConfig;
using perceiver::ParamSet;
using perceiver::Perceiver;
using perceiver::PerceiverConfig;
using perceiver::PermutationSpec;
using perceiver::PositionGrid;
using perceiver::Rng;
using perceiver::StepDecaySchedule;
using perceiver::Tape;
using perceiver::Tensor;
using perceiver::TowerSharing;
using perceiver::TrainOptions;
using perceiver::accounting::count;
using perceiver::accounting::CountReport;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

std::string config_path(const std::string& name) {
  return std::string(PERCEIVER_CONFIG_DIR) + "/" + name;
}

Tensor<double> random_bytes(std::size_t m, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor<double> t({m, c});
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = dist(gen);
  return t;
}

const Tensor<double>* find_param(const ParamSet<double>& ps, const std::string& name) {
  for (const auto& p : ps)
    if (p.name == name) return &p.tensor;
  return nullptr;
}

// ---- criterion 1: parameter counts on the bundled configs ----------------------

Outcome criterion_params() {
  struct Case {
    const char* file;
    double published;  // published table value, to the printed 0.1M
  };
  // Published rows quote some models with the classifier head and some
  // without, so a config passes when either column lands within 2%.
  const Case cases[] = {
      {"imagenet_8x.cfg", 44.9e6},
      {"imagenet_1x_at_start.cfg", 41.1e6},
      {"imagenet_8x_noshare.cfg", 326.2e6},
      {"crossonly_4.cfg", 12.7e6},
  };
  Outcome out;
  out.pass = true;
  std::string got;
  for (const Case& c : cases) {
    perceiver::io::ConfigMap cfg = perceiver::io::ConfigMap::parse_file(config_path(c.file));
    const PerceiverConfig model = perceiver::cli::model_from_config(cfg);
    const std::size_t rows = cfg.get_size("count.byte_rows", 50176);
    const CountReport r = count(model, rows);
    if (r.rows.empty()) {
      out.pass = false;
      out.detail = fmt("%s produced an empty per-layer breakdown", c.file);
      return out;
    }
    const double incl = static_cast<double>(r.total_params);
    const double excl = static_cast<double>(r.params_excluding_head);
    const bool ok = std::abs(incl - c.published) <= 0.02 * c.published ||
                    std::abs(excl - c.published) <= 0.02 * c.published;
    if (!got.empty()) got += " ";
    got += fmt("%.2fM", (ok && std::abs(excl - c.published) < std::abs(incl - c.published)
                             ? excl
                             : incl) /
                            1e6);
    if (!ok) {
      out.pass = false;
      out.detail = fmt("%s: %.0f params (%.0f excl. head) misses published %.1fM by >2%%",
                       c.file, incl, excl, c.published / 1e6);
      return out;
    }
  }
  out.detail = "params " + got + " vs published 44.9M 41.1M 326.2M 12.7M, all within 2%; "
               "per-layer breakdown populated";
  return out;
}

// ---- criterion 2: FLOP counts on the bundled configs ---------------------------

Outcome criterion_flops() {
  struct Case {
    const char* file;
    double published;  // unfused convention
  };
  const Case cases[] = {
      {"imagenet_8x.cfg", 707.2e9},          {"imagenet_1x_at_start.cfg", 404.3e9},
      {"imagenet_2x_at_start.cfg", 447.6e9}, {"imagenet_4x_interleaved.cfg", 534.1e9},
      {"crossonly_4.cfg", 173.1e9},          {"crossonly_8.cfg", 346.1e9},
      {"crossonly_12.cfg", 519.2e9},
  };
  Outcome out;
  out.pass = true;
  std::string got;
  for (const Case& c : cases) {
    perceiver::io::ConfigMap cfg = perceiver::io::ConfigMap::parse_file(config_path(c.file));
    const PerceiverConfig model = perceiver::cli::model_from_config(cfg);
    const std::size_t rows = cfg.get_size("count.byte_rows", 50176);
    const double flops = static_cast<double>(count(model, rows).total_flops);
    if (!got.empty()) got += " ";
    got += fmt("%.1fB", flops / 1e9);
    if (std::abs(flops - c.published) > 0.05 * c.published) {
      out.pass = false;
      out.detail = fmt("%s: %.1fB unfused FLOPs misses published %.1fB by >5%%", c.file,
                       flops / 1e9, c.published / 1e9);
      return out;
    }
  }
  out.detail = "unfused FLOPs " + got +
               " vs published 707.2B 404.3B 447.6B 534.1B 173.1B 346.1B 519.2B, all within 5%";
  return out;
}

// ---- criterion 3: analytic count == instrumented execution ---------------------

Outcome criterion_count_oracle() {
  std::mt19937_64 gen(321);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + gen() % (hi - lo + 1); };
  const int trials = 24;
  for (int trial = 0; trial < trials; ++trial) {
    PerceiverConfig cfg;
    cfg.cross_heads = pick(1, 2);
    cfg.latent_heads = pick(1, 2);
    cfg.input_channels = pick(3, 12);
    cfg.num_classes = pick(2, 5);
    cfg.latent_count = pick(1, 8);
    cfg.latent_dim = cfg.latent_heads * pick(2, 6);
    cfg.qk_channels = cfg.cross_heads * pick(1, 5);
    cfg.num_cross_attends = pick(1, 3);
    cfg.blocks_per_cross = pick(1, 2);
    cfg.self_attends_per_block = pick(0, 2);
    cfg.dense_widening = (trial % 3 == 0) ? 2.0 : 1.0;
    cfg.share_cross_after_first = (trial % 2 == 0);
    cfg.tower_sharing = (trial % 4 < 2) ? TowerSharing::shared : TowerSharing::unshared;
    cfg.arrangement = (trial % 2 == 0) ? Arrangement::interleaved : Arrangement::at_start;
    const std::size_t m = pick(4, 64);

    Rng rng(1000 + static_cast<std::uint64_t>(trial));
    Perceiver<double> model(cfg, rng);
    Tensor<double> bytes = random_bytes(m, cfg.input_channels, 77 + trial);

    const CountReport analytic = count(cfg, m);
    perceiver::flops::count_t measured = 0;
    {
      perceiver::flops::CountScope scope;
      model.forward(bytes, static_cast<Tape<double>*>(nullptr));
      measured = scope.total();
    }
    if (measured != analytic.total_flops) {
      Outcome out;
      out.detail = fmt("trial %d (M=%zu C=%zu N=%zu D=%zu crosses=%zu): analytic %llu != "
                       "instrumented %llu",
                       trial, m, cfg.input_channels, cfg.latent_count, cfg.latent_dim,
                       cfg.num_cross_attends,
                       static_cast<unsigned long long>(analytic.total_flops),
                       static_cast<unsigned long long>(measured));
      return out;
    }
  }
  Outcome out;
  out.pass = true;
  out.detail = fmt("%d/%d random tiny configs (M<=64, N<=8): instrumented forward equals "
                   "the closed-form count exactly",
                   trials, trials);
  return out;
}

// ---- criterion 4: permutation invariance vs an order-sensitive probe ----------

Outcome criterion_invariance() {
  PerceiverConfig cfg;
  cfg.input_channels = 11;
  cfg.num_classes = 4;
  cfg.latent_count = 8;
  cfg.latent_dim = 16;
  cfg.num_cross_attends = 2;
  cfg.blocks_per_cross = 1;
  cfg.self_attends_per_block = 2;
  cfg.cross_heads = 1;
  cfg.latent_heads = 2;
  Rng model_rng(99);
  Perceiver<float> model(cfg, model_rng);
  Rng probe_rng(98);
  ConvProbe<float> probe(cfg.input_channels, 16, cfg.num_classes, probe_rng);

  const std::size_t m = 256;
  const PermutationSpec perm = perceiver::make_permutation(m, 1234);  // shared by all inputs
  std::mt19937_64 gen(555);
  // Wide enough inputs to push the probe's GELU into its curved region; near
  // the origin GELU is almost linear and mean pooling would hide the probe's
  // order sensitivity.
  std::uniform_real_distribution<double> dist(-3.0, 3.0);

  double worst_rel = 0.0;
  double min_probe_change = std::numeric_limits<double>::infinity();
  for (int input = 0; input < 50; ++input) {
    Tensor<float> bytes({m, cfg.input_channels});
    for (std::size_t i = 0; i < bytes.size(); ++i)
      bytes.data()[i] = static_cast<float>(dist(gen));
    ByteArray<float> arr = ByteArray<float>::single(bytes, "synthetic", {});
    ByteArray<float> per = perceiver::permute_bytes(arr, perm);

    Tensor<float> a = model.forward(arr.data, static_cast<Tape<float>*>(nullptr));
    Tensor<float> b = model.forward(per.data, static_cast<Tape<float>*>(nullptr));
    double scale = 0.0, diff = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      scale = std::max({scale, std::abs(static_cast<double>(a.data()[j])),
                        std::abs(static_cast<double>(b.data()[j]))});
      diff = std::max(diff, std::abs(static_cast<double>(a.data()[j]) -
                                     static_cast<double>(b.data()[j])));
    }
    worst_rel = std::max(worst_rel, diff / std::max(scale, 1e-30));

    // The probe's sensitivity is measured with the same relative metric the
    // model is held to, so the two numbers are directly comparable.
    const std::vector<double> pa = probe.forward(arr.data);
    const std::vector<double> pb = probe.forward(per.data);
    double probe_scale = 0.0, probe_diff = 0.0;
    for (std::size_t j = 0; j < pa.size(); ++j) {
      probe_scale = std::max({probe_scale, std::abs(pa[j]), std::abs(pb[j])});
      probe_diff = std::max(probe_diff, std::abs(pa[j] - pb[j]));
    }
    min_probe_change = std::min(min_probe_change, probe_diff / std::max(probe_scale, 1e-30));
  }

  Outcome out;
  out.pass = worst_rel <= 1e-6 && min_probe_change > 1e-2;
  out.detail = fmt("50 inputs (M=256, float32): max relative logit drift %.2e under a shared "
                   "row permutation (budget 1e-6); order-sensitive conv probe moved >= %.3f "
                   "relative on every input (must exceed 0.01)",
                   worst_rel, min_probe_change);
  return out;
}

// ---- criterion 5: finite differences + aliased-gradient oracle -----------------

Outcome criterion_gradients() {
  // Tiny config with both kinds of sharing active: 3 cross-attends (2nd/3rd
  // aliased) and 3 towers sharing one two-block parameter set.
  PerceiverConfig cfg;
  cfg.input_channels = 5;
  cfg.num_classes = 3;
  cfg.latent_count = 2;
  cfg.latent_dim = 4;
  cfg.num_cross_attends = 3;
  cfg.blocks_per_cross = 1;
  cfg.self_attends_per_block = 2;
  cfg.cross_heads = 1;
  cfg.latent_heads = 2;

  Rng rng(606);
  Perceiver<double> model(cfg, rng);
  Tensor<double> bytes = random_bytes(8, cfg.input_channels, 42);
  const std::size_t label = 1;

  Tape<double> tape;
  Tensor<double> loss = model.loss(model.forward(bytes, &tape), label, &tape);
  tape.backward(loss);

  auto loss_value = [&]() {
    Tensor<double> l = model.loss(model.forward(bytes, static_cast<Tape<double>*>(nullptr)),
                                  label, static_cast<Tape<double>*>(nullptr));
    return l.at(0, 0);
  };

  // Part A: central differences on three coordinates of every parameter
  // tensor (71 tensors here, so >200 sampled coordinates overall).
  ParamSet<double> ps = model.params();
  std::mt19937_64 pick(13);
  std::size_t checked = 0;
  double max_rel = 0.0;
  std::string worst_name;
  for (const auto& p : ps) {
    for (int rep = 0; rep < 3; ++rep) {
      const std::size_t i = pick() % p.tensor.size();
      double* slot = const_cast<Tensor<double>&>(p.tensor).data() + i;
      const double saved = *slot;
      // h near the float64 central-difference optimum: truncation (~f'''h^2/6)
      // and cancellation (~eps/h) are both ~1e-10 here.
      const double h = 1e-6 * std::max(1.0, std::abs(saved));
      *slot = saved + h;
      const double up = loss_value();
      *slot = saved - h;
      const double down = loss_value();
      *slot = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = p.tensor.grad_view()[i];
      // The absolute floor sits above the ~1e-11 noise of a float64 central
      // difference, so near-zero-gradient coordinates compare against it
      // instead of amplifying quantization noise into the relative error.
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4});
      if (rel > max_rel) {
        max_rel = rel;
        worst_name = p.name;
      }
      ++checked;
    }
  }

  // Part B: gradients on aliased tensors must equal the sum over an unrolled
  // model whose per-depth copies were initialized from the shared tensors.
  PerceiverConfig unrolled_cfg = cfg;
  unrolled_cfg.share_cross_after_first = false;
  unrolled_cfg.tower_sharing = TowerSharing::unshared;
  Rng rng2(77);
  Perceiver<double> unrolled(unrolled_cfg, rng2);
  ParamSet<double> pu = unrolled.params();
  bool copier_ok = true;
  auto copy_into = [&](const std::string& from, const std::string& to) {
    const Tensor<double>* src = find_param(ps, from);
    const Tensor<double>* dst = find_param(pu, to);
    if (!src || !dst || src->size() != dst->size()) {
      copier_ok = false;
      return;
    }
    std::copy(src->values().begin(), src->values().end(),
              const_cast<Tensor<double>*>(dst)->data());
  };
  for (const auto& p : ps) {
    const std::string& n = p.name;
    if (n.rfind("cross.first.", 0) == 0) {
      copy_into(n, "cross0." + n.substr(12));
    } else if (n.rfind("cross.shared.", 0) == 0) {
      copy_into(n, "cross1." + n.substr(13));
      copy_into(n, "cross2." + n.substr(13));
    } else if (n.rfind("tower.", 0) == 0) {
      for (int t = 0; t < 3; ++t) copy_into(n, "tower" + std::to_string(t) + n.substr(5));
    } else {
      copy_into(n, n);
    }
  }
  if (!copier_ok) {
    Outcome out;
    out.detail = "unrolled-copy oracle could not align parameter names";
    return out;
  }

  Tape<double> tape_u;
  Tensor<double> loss_u =
      unrolled.loss(unrolled.forward(bytes, &tape_u), label, &tape_u);
  if (std::abs(loss.at(0, 0) - loss_u.at(0, 0)) > 1e-12) {
    Outcome out;
    out.detail = fmt("shared and unrolled models disagree on the loss itself: %.17g vs %.17g",
                     loss.at(0, 0), loss_u.at(0, 0));
    return out;
  }
  tape_u.backward(loss_u);

  double oracle_rel = 0.0;
  std::size_t aliased_coords = 0;
  for (const auto& p : ps) {
    const std::string& n = p.name;
    std::vector<std::string> copies;
    if (n.rfind("cross.shared.", 0) == 0)
      copies = {"cross1." + n.substr(13), "cross2." + n.substr(13)};
    else if (n.rfind("tower.", 0) == 0)
      copies = {"tower0" + n.substr(5), "tower1" + n.substr(5), "tower2" + n.substr(5)};
    else
      continue;
    for (std::size_t i = 0; i < p.tensor.size(); ++i) {
      double sum = 0.0;
      for (const std::string& c : copies) {
        const Tensor<double>* u = find_param(pu, c);
        if (!u) {
          Outcome out;
          out.detail = "unrolled-copy oracle is missing parameter " + c;
          return out;
        }
        if (u->has_grad()) sum += u->grad_view()[i];
      }
      const double got = p.tensor.grad_view()[i];
      oracle_rel = std::max(oracle_rel, std::abs(sum - got) / std::max(1.0, std::abs(sum)));
      ++aliased_coords;
    }
  }

  Outcome out;
  out.pass = checked >= 200 && max_rel < 1e-5 && oracle_rel < 1e-9;
  out.detail = fmt("%zu sampled coordinates (float64): max FD relative error %.2e (budget "
                   "1e-5 with a 1e-4 absolute floor, worst at %s); aliased gradients match "
                   "the unrolled-copy sum over %zu shared coordinates within %.2e",
                   checked, max_rel, worst_name.c_str(), aliased_coords, oracle_rel);
  return out;
}

// ---- criterion 6: LAMB vs hand Adam --------------------------------------------

Outcome criterion_optimizer() {
  // Hand-computed single-scalar step with the trust ratio live: the ratio
  // |theta|/|r| collapses the update to lr*|theta|*sign(r).
  Tensor<double> w1 = Tensor<double>::from_values({1}, {1.0});
  w1.set_requires_grad(true);
  w1.grad() = {1.0};
  Lamb<double> opt1({{"w", w1}}, {});
  opt1.step(0.1);
  const double scalar_err1 = std::abs(w1.data()[0] - 0.9);
  w1.grad() = {1.0};
  opt1.step(0.1);
  const double scalar_err2 = std::abs(w1.data()[0] - 0.81);

  // Hand-computed single-scalar step with the ratio forced to 1: plain Adam,
  // theta <- 1 - lr * 1/(1 + eps) after one step of constant unit gradient.
  LambConfig forced;
  forced.force_trust_ratio_one = true;
  Tensor<double> w2 = Tensor<double>::from_values({1}, {1.0});
  w2.set_requires_grad(true);
  w2.grad() = {1.0};
  Lamb<double> opt2({{"w", w2}}, forced);
  opt2.step(0.1);
  const double adam_scalar_err = std::abs(w2.data()[0] - (1.0 - 0.1 / (1.0 + 1e-6)));

  // Multi-step vector run against an independently written Adam.
  const std::size_t n = 7;
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> theta0(n);
  for (double& v : theta0) v = dist(gen);
  Tensor<double> w = Tensor<double>::from_values({n}, theta0);
  w.set_requires_grad(true);
  w.grad() = std::vector<double>(n, 0.0);
  Lamb<double> opt({{"w", w}}, forced);

  std::vector<double> theta = theta0, m(n, 0.0), v(n, 0.0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-6, lr = 0.05;
  double oracle_err = 0.0;
  for (int t = 1; t <= 9; ++t) {
    std::vector<double> g(n);
    for (double& gi : g) gi = dist(gen);
    w.grad() = g;
    opt.step(lr);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mhat = m[i] / (1.0 - std::pow(b1, t));
      const double vhat = v[i] / (1.0 - std::pow(b2, t));
      theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      oracle_err = std::max(oracle_err, std::abs(theta[i] - w.data()[i]));
    }
  }

  Outcome out;
  out.pass = scalar_err1 < 1e-15 && scalar_err2 < 1e-15 && adam_scalar_err < 1e-15 &&
             oracle_err < 1e-12;
  out.detail = fmt("forced trust ratio tracks an independent Adam for 9 steps within %.2e "
                   "(budget 1e-12); hand scalar steps off by %.1e (live ratio) and %.1e "
                   "(forced ratio)",
                   oracle_err, std::max(scalar_err1, scalar_err2), adam_scalar_err);
  return out;
}

// ---- criteria 7 & 10 share an in-process training runner -----------------------

struct TaskResult {
  double test_accuracy = -1.0;
  std::size_t steps = 0;
  bool diverged = false;
};

TaskResult run_task(const std::string& config_name, const std::string& run_leaf,
                    const std::function<void(Dataset<float>&, Rng&)>& mutate = {}) {
  perceiver::io::ConfigMap cfg =
      perceiver::io::ConfigMap::parse_file(config_path(config_name));
  PerceiverConfig model_cfg = perceiver::cli::model_from_config(cfg);
  const perceiver::cli::DatasetSpec dspec = perceiver::cli::dataset_from_config(cfg);
  perceiver::cli::TrainSettings ts = perceiver::cli::train_from_config(cfg);

  perceiver::GeneratorOverrides tweak;
  tweak.num_bands = dspec.num_bands;
  tweak.max_resolution = dspec.max_resolution;
  Dataset<float> data = perceiver::make_synthetic<float>(
      dspec.kind, dspec.train_examples, dspec.test_examples, dspec.seed, tweak);
  if (mutate) {
    Rng aug(9000);
    mutate(data, aug);
  }
  if (model_cfg.input_channels == 0) model_cfg.input_channels = data.train[0].input.cols();
  if (model_cfg.num_classes == 0) model_cfg.num_classes = data.num_classes;

  Rng model_rng(ts.model_seed);
  Perceiver<float> model(model_cfg, model_rng);
  LambConfig opt_cfg;
  opt_cfg.weight_decay = ts.weight_decay;
  Lamb<float> opt(model.params(), opt_cfg);
  StepDecaySchedule schedule(ts.base_lr, ts.decay_factor, ts.decay_epochs,
                             ts.steps_per_epoch);

  TrainOptions opts = ts.options;
  opts.run_dir =
      (std::filesystem::temp_directory_path() / "perceiver_acceptance" / run_leaf).string();
  std::filesystem::remove_all(opts.run_dir);

  const perceiver::TrainResult res = perceiver::train(model, opt, schedule, data, opts);
  TaskResult out;
  out.steps = res.steps_run;
  out.diverged = res.diverged;
  if (!res.diverged && !data.test.empty())
    out.test_accuracy = perceiver::evaluate(model, data.test);
  return out;
}

// ---- criterion 7: desk-scale learning + permutation robustness -----------------

Outcome criterion_learning() {
  const TaskResult sign = run_task("task_sign_of_mean.cfg", "c7_sign");
  if (sign.diverged) {
    Outcome out;
    out.detail = "sign-of-mean training diverged";
    return out;
  }

  const TaskResult shapes = run_task("task_shapes8x8.cfg", "c7_shapes");
  if (shapes.diverged) {
    Outcome out;
    out.detail = "shape-classification training diverged";
    return out;
  }

  // Same task with every example's 64 byte rows shuffled by one shared
  // permutation, train and test alike. Being a set function, the model should
  // land at (numerically) the same accuracy.
  const PermutationSpec perm = perceiver::make_permutation(64, 777);
  auto shuffle_rows = [&](Dataset<float>& d, Rng&) {
    for (auto* split : {&d.train, &d.test})
      for (auto& ex : *split) ex.input = perceiver::permute_bytes(ex.input, perm);
  };
  const TaskResult permuted = run_task("task_shapes8x8.cfg", "c7_shapes_permuted", shuffle_rows);
  if (permuted.diverged) {
    Outcome out;
    out.detail = "row-permuted shape-classification training diverged";
    return out;
  }

  const double gap = std::abs(shapes.test_accuracy - permuted.test_accuracy);
  Outcome out;
  out.pass = sign.test_accuracy >= 0.99 && sign.steps <= 2000 &&
             shapes.test_accuracy >= 0.90 && gap <= 0.005;
  out.detail = fmt("sign-of-mean %.1f%% after %zu steps (need >=99%% within 2000); "
                   "shapes-8x8 %.1f%% with one cross-attend (need >=90%%); row-permuted "
                   "rerun %.1f%%, gap %.2f%% (budget 0.5%%)",
                   100.0 * sign.test_accuracy, sign.steps, 100.0 * shapes.test_accuracy,
                   100.0 * permuted.test_accuracy, 100.0 * gap);
  return out;
}

// ---- criterion 8: Fourier feature invariants ------------------------------------

Outcome criterion_fourier() {
  std::size_t combos = 0;
  for (std::size_t dims = 1; dims <= 3; ++dims) {
    for (std::size_t bands = 1; bands <= 6; ++bands) {
      for (const double mu : {2.0, 3.0, 4.5, 8.0, 16.0, 224.0}) {
        // Channel formula d(2K+1).
        const std::size_t want = dims * (2 * bands + 1);
        if (perceiver::fourier_channels(dims, bands, true) != want) {
          Outcome out;
          out.detail = fmt("fourier_channels(%zu, %zu) != %zu", dims, bands, want);
          return out;
        }
        // Band endpoints and equal spacing.
        const std::vector<double> f = perceiver::band_frequencies(bands, mu);
        const double top = mu / 2.0;
        const double tol = 1e-12 * std::max(1.0, top);
        if (bands == 1) {
          if (std::abs(f[0] - top) > tol) {
            Outcome out;
            out.detail = fmt("K=1, mu=%g: single band %.17g != Nyquist %.17g", mu, f[0], top);
            return out;
          }
        } else {
          if (std::abs(f.front() - 1.0) > 1e-12 || std::abs(f.back() - top) > tol) {
            Outcome out;
            out.detail = fmt("K=%zu, mu=%g: endpoints (%.17g, %.17g) != (1, %.17g)", bands,
                             mu, f.front(), f.back(), top);
            return out;
          }
          const double step = (top - 1.0) / static_cast<double>(bands - 1);
          for (std::size_t k = 0; k + 1 < bands; ++k)
            if (std::abs((f[k + 1] - f[k]) - step) > tol) {
              Outcome out;
              out.detail = fmt("K=%zu, mu=%g: spacing %.17g != %.17g at band %zu", bands, mu,
                               f[k + 1] - f[k], step, k);
              return out;
            }
        }
        // Boundedness of the actual features on a real grid.
        std::vector<std::size_t> axes(dims, 5);
        const PositionGrid grid = PositionGrid::centers(axes);
        FourierConfig fc;
        fc.num_bands = bands;
        fc.max_resolution = {mu};
        const Tensor<double> feats = perceiver::fourier_features<double>(grid, fc);
        if (feats.shape()[1] != want) {
          Outcome out;
          out.detail = fmt("feature tensor width %zu != d(2K+1) = %zu", feats.shape()[1], want);
          return out;
        }
        for (std::size_t i = 0; i < feats.size(); ++i)
          if (std::abs(feats.data()[i]) > 1.0 + 1e-12) {
            Outcome out;
            out.detail = fmt("unbounded feature %.17g at (d=%zu, K=%zu, mu=%g)",
                             feats.data()[i], dims, bands, mu);
            return out;
          }
        ++combos;
      }
    }
  }
  Outcome out;
  out.pass = true;
  out.detail = fmt("%zu (d, K, mu) combinations: channels d(2K+1), endpoints {1, mu/2}, "
                   "spacing equal within 1e-12, features bounded by 1",
                   combos);
  return out;
}

// ---- criterion 9: latent model scales linearly, byte transformer quadratically --

Outcome criterion_scaling() {
  perceiver::io::ConfigMap cfg =
      perceiver::io::ConfigMap::parse_file(config_path("imagenet_8x.cfg"));
  const PerceiverConfig model = perceiver::cli::model_from_config(cfg);
  const perceiver::accounting::TransformerConfig baseline =
      perceiver::cli::baseline_from_config(cfg);

  const std::size_t rows[] = {1024, 2048, 4096, 8192};
  double x[4], y[4];
  for (int i = 0; i < 4; ++i) {
    x[i] = static_cast<double>(rows[i]);
    y[i] = static_cast<double>(count(model, rows[i]).total_flops);
  }
  double mx = 0, my = 0;
  for (int i = 0; i < 4; ++i) {
    mx += x[i] / 4;
    my += y[i] / 4;
  }
  double sxx = 0, sxy = 0, ss_tot = 0;
  for (int i = 0; i < 4; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  double ss_res = 0;
  for (int i = 0; i < 4; ++i) {
    const double pred = my + slope * (x[i] - mx);
    ss_res += (y[i] - pred) * (y[i] - pred);
  }
  const double r2 = 1.0 - ss_res / ss_tot;

  double ratios[3];
  for (int i = 0; i < 3; ++i) {
    const double lo =
        static_cast<double>(perceiver::accounting::transformer_flops(baseline, rows[i]));
    const double hi =
        static_cast<double>(perceiver::accounting::transformer_flops(baseline, rows[i + 1]));
    ratios[i] = hi / lo;
  }
  const bool trending = ratios[0] < ratios[1] && ratios[1] < ratios[2] && ratios[2] < 4.0 &&
                        ratios[2] > 3.5;

  Outcome out;
  out.pass = r2 > 0.999 && trending;
  out.detail = fmt("counted FLOPs over M in {1k,2k,4k,8k}: linear fit R^2 = %.9f (need "
                   ">0.999); byte-transformer doubling ratios %.3f -> %.3f -> %.3f trend "
                   "to 4",
                   r2, ratios[0], ratios[1], ratios[2]);
  return out;
}

// ---- criterion 10: multimodal plumbing ------------------------------------------

Outcome criterion_multimodal() {
  // Full-scale fusion: 12,544 video patch rows + 480 audio rows on a common
  // width of max(771, 257) + 4 embedding channels = 775.
  {
    const std::size_t frames = 32, hw = 224;
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> video(frames * hw * hw * 3);
    for (double& v : video) v = unit(gen);
    FourierConfig vcfg;
    vcfg.num_bands = 64;
    vcfg.max_resolution = {16.0, 28.0, 28.0};
    ByteArray<float> vb =
        perceiver::video_to_patches<float>(video, frames, hw, hw, 2, 8, 8, vcfg);

    std::vector<double> wave(61440, 0.25);
    FourierConfig acfg;
    acfg.num_bands = 64;
    acfg.max_resolution = {480.0};
    ByteArray<float> ab = perceiver::audio_to_segments<float>(wave, 128, acfg);

    Rng rng(10);
    perceiver::ModalityFuser<float> fuser({{"video", 771}, {"audio", 257}}, 4, rng);
    const ByteArray<float> fused = fuser.fuse({vb, ab});
    if (fused.rows() != 13024 || fused.cols() != 775 || fused.spans.size() != 2) {
      Outcome out;
      out.detail = fmt("fused video+audio came out %zu x %zu with %zu spans, expected "
                       "13024 x 775 with 2 spans",
                       fused.rows(), fused.cols(), fused.spans.size());
      return out;
    }
  }

  // Dropout calibration over 10^4 draws at p = 0.3.
  Dataset<float> probe = perceiver::make_synthetic<float>("two_modality_parity", 1, 1, 42);
  Rng drop_rng(4242);
  int drops = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    ByteArray<float> clone = probe.train[0].input.clone();
    if (perceiver::apply_modality_dropout(clone, "video", 0.3, drop_rng)) ++drops;
  }
  const double rate = static_cast<double>(drops) / trials;
  if (std::abs(rate - 0.3) > 0.02) {
    Outcome out;
    out.detail = fmt("video dropout rate %.4f outside 0.3 +/- 0.02 over %d draws", rate,
                     trials);
    return out;
  }

  // Parity needs both modalities: force-drop video everywhere (train and
  // test) and the task must collapse to chance; leave fusion on and it must
  // be solved.
  auto drop_video_everywhere = [](Dataset<float>& d, Rng& rng) {
    for (auto* split : {&d.train, &d.test})
      for (auto& ex : *split)
        perceiver::apply_modality_dropout(ex.input, "video", 1.0, rng, /*force=*/true);
  };
  const TaskResult crippled =
      run_task("task_parity.cfg", "c10_parity_dropped", drop_video_everywhere);
  const TaskResult fused_run = run_task("task_parity.cfg", "c10_parity_fused");
  if (crippled.diverged || fused_run.diverged) {
    Outcome out;
    out.detail = "parity training diverged";
    return out;
  }

  Outcome out;
  out.pass = crippled.test_accuracy <= 0.55 && fused_run.test_accuracy >= 0.95;
  out.detail = fmt("fused video+audio: 13024 rows x 775 channels; dropout rate %.4f "
                   "(target 0.3 +/- 0.02); parity %.1f%% with video force-dropped "
                   "(need <=55%%) vs %.1f%% with fusion on (need >=95%%)",
                   rate, 100.0 * crippled.test_accuracy, 100.0 * fused_run.test_accuracy);
  return out;
}

// ---- harness --------------------------------------------------------------------

struct Criterion {
  int id;
  const char* label;
  Outcome (*run)();
  double budget_seconds;
};

const Criterion kCriteria[] = {
    {1, "parameter counts", criterion_params, 1.0},
    {2, "FLOP counts", criterion_flops, 1.0},
    {3, "count oracle", criterion_count_oracle, 60.0},
    {4, "permutation invariance", criterion_invariance, 60.0},
    {5, "gradient integrity", criterion_gradients, 300.0},
    {6, "optimizer correctness", criterion_optimizer, 10.0},
    {7, "desk-scale learning", criterion_learning, 900.0},
    {8, "Fourier invariants", criterion_fourier, 10.0},
    {9, "scaling bench", criterion_scaling, 60.0},
    {10, "multimodal plumbing", criterion_multimodal, 900.0},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
      if (only < 1 || only > 10) {
        std::fprintf(stderr, "--criterion expects a number in [1, 10], got '%s'\n", argv[i]);
        return 2;
      }
    } else if (arg == "--help" || arg == "-h") {
      std::printf("usage: acceptance [--criterion N]\n"
                  "Runs the ten acceptance criteria (or just criterion N) and prints one\n"
                  "PASS/FAIL line each. Exit code 0 only if everything executed passed.\n");
      return 0;
    } else {
      std::fprintf(stderr, "unknown argument '%s' (try --help)\n", arg.c_str());
      return 2;
    }
  }

  bool all_pass = true;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > c.budget_seconds) {
      outcome.pass = false;
      outcome.detail += fmt(" [exceeded the %.0fs runtime budget]", c.budget_seconds);
    }
    std::printf("criterion %d: %s — %s (%s; %.1fs of %.0fs budget)\n", c.id,
                outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str(), c.label, elapsed,
                c.budget_seconds);
    std::fflush(stdout);
    all_pass = all_pass && outcome.pass;
  }
  return all_pass ? 0 : 1;
}
