#pragma once

// Training loop. Deterministic by construction: batch indices come from one
// seeded generator, per-example tapes are replayed serially, and gradient
// accumulation across the batch is ordinary serial addition — so a fixed seed
// reproduces the loss curve bit-exactly on any backend.
//
// Divergence policy: the first non-finite value anywhere (forward, loss, or
// gradient) aborts the run, keeping the last interval checkpoint on disk and
// reporting the step and reason; no final checkpoint is written over it.

#include "perceiver/byte_array.hpp"
#include "perceiver/common.hpp"
#include "perceiver/io/checkpoint.hpp"
#include "perceiver/io/csv.hpp"
#include "perceiver/model.hpp"
#include "perceiver/optim.hpp"
#include "perceiver/tensor.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace perceiver {

template <typename T>
struct Example {
  ByteArray<T> input;
  std::size_t label = 0;
};

template <typename T>
struct Dataset {
  std::string name;
  std::size_t num_classes = 0;
  std::vector<Example<T>> train, test;
};

struct TrainOptions {
  std::size_t steps = 1000;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  // interval in steps; 0 writes the final one only
  std::string run_dir;               // metrics.csv and checkpoints land here
  std::string config_text;           // resolved configuration embedded in checkpoints
  double modality_dropout_p = 0.0;   // train-time only; evaluation never drops
  std::string dropout_modality = "video";
};

struct TrainResult {
  std::size_t steps_run = 0;
  bool diverged = false;
  std::string divergence_message;
  double last_loss = 0.0;
  double last_accuracy = 0.0;
};

template <typename T>
std::size_t argmax(const Tensor<T>& logits) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.size(); ++j)
    if (logits.data()[j] > logits.data()[best]) best = j;
  return best;
}

// Accuracy over examples (all of them when limit is 0). No tape, no dropout.
template <typename T>
double evaluate(Perceiver<T>& model, const std::vector<Example<T>>& examples,
                std::size_t limit = 0) {
  if (examples.empty()) throw domain_error("evaluate: no examples");
  const std::size_t n = (limit == 0 || limit > examples.size()) ? examples.size() : limit;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<T> logits = model.forward(examples[i].input, nullptr);
    if (argmax(logits) == examples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

template <typename T>
TrainResult train(Perceiver<T>& model, Lamb<T>& opt, const StepDecaySchedule& schedule,
                  const Dataset<T>& data, const TrainOptions& opts) {
  if (data.train.empty()) throw domain_error("train: dataset has no training examples");
  if (opts.batch_size == 0) throw config_error("train: batch size must be positive");
  std::filesystem::create_directories(opts.run_dir);
  io::CsvWriter metrics(opts.run_dir + "/metrics.csv",
                        {"step", "epoch", "lr", "loss", "accuracy"});
  Rng rng(opts.seed);
  ParamSet<T> params = model.params();
  const bool use_dropout = opts.modality_dropout_p > 0.0 &&
                           !data.train.empty() &&
                           data.train[0].input.has_span(opts.dropout_modality);
  auto checkpoint_path = [&](std::size_t step) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "/checkpoint_step%06zu.bin", step);
    return opts.run_dir + buf;
  };

  TrainResult result;
  const T inv_batch = static_cast<T>(1.0 / static_cast<double>(opts.batch_size));
  for (std::size_t step = 0; step < opts.steps; ++step) {
    const double lr = schedule.lr_at(step);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    try {
      opt.zero_grad();
      for (std::size_t b = 0; b < opts.batch_size; ++b) {
        const Example<T>& ex = data.train[rng.uniform_index(data.train.size())];
        Tensor<T> bytes = ex.input.data;
        if (use_dropout) {
          ByteArray<T> dropped = ex.input.clone();
          apply_modality_dropout(dropped, opts.dropout_modality, opts.modality_dropout_p, rng);
          bytes = dropped.data;
        }
        Tape<T> tape;
        Tensor<T> logits = model.forward(bytes, &tape);
        Tensor<T> loss = model.loss(logits, ex.label, &tape);
        Tensor<T> scaled = scale(loss, inv_batch, &tape);
        tape.backward(scaled);
        loss_sum += static_cast<double>(loss.data()[0]);
        if (argmax(logits) == ex.label) ++correct;
      }
      opt.step(lr);
    } catch (const numeric_error& e) {
      result.diverged = true;
      result.divergence_message =
          "step " + std::to_string(step) + ": " + e.what();
      break;
    }
    result.steps_run = step + 1;
    result.last_loss = loss_sum / static_cast<double>(opts.batch_size);
    result.last_accuracy =
        static_cast<double>(correct) / static_cast<double>(opts.batch_size);
    metrics.row({static_cast<double>(step), static_cast<double>(schedule.epoch_of(step)), lr,
                 result.last_loss, result.last_accuracy});
    if (opts.checkpoint_every != 0 && (step + 1) % opts.checkpoint_every == 0)
      io::save_checkpoint(checkpoint_path(step + 1), opts.config_text, params);
  }
  if (!result.diverged)
    io::save_checkpoint(opts.run_dir + "/checkpoint_final.bin", opts.config_text, params);
  return result;
}

}  // namespace perceiver
