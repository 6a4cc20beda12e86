#pragma once

// Command-line entry points. Exit codes: 0 success, 1 runtime failure
// (including training divergence), 2 configuration error (bad keys/values,
// mismatched checkpoints, bad usage).

#include "perceiver/accounting/count.hpp"
#include "perceiver/io/config_file.hpp"
#include "perceiver/model.hpp"
#include "perceiver/train.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace perceiver::cli {

// Config-section parsers (shared with the tests).
PerceiverConfig model_from_config(io::ConfigMap& cfg);
accounting::TransformerConfig baseline_from_config(io::ConfigMap& cfg);

struct DatasetSpec {
  std::string kind = "sign_of_mean";  // synthetic kind, or "file"
  std::string path;                   // directory for kind = file
  std::size_t train_examples = 512;
  std::size_t test_examples = 256;
  std::uint64_t seed = 7;
  std::size_t num_bands = 0;     // 0 keeps the generator default
  double max_resolution = 0.0;   // 0 keeps the generator default
};
DatasetSpec dataset_from_config(io::ConfigMap& cfg);

struct TrainSettings {
  TrainOptions options;
  double base_lr = 0.004;
  double decay_factor = 0.1;
  std::vector<std::size_t> decay_epochs = {84, 102, 114};
  std::size_t steps_per_epoch = 100;
  std::uint64_t model_seed = 1;
  double weight_decay = 0.0;
};
TrainSettings train_from_config(io::ConfigMap& cfg);

// Serializes every resolved value back to a config document, so a run
// directory always carries the exact settings that produced it.
io::ConfigMap resolved_config(const PerceiverConfig& model, const DatasetSpec& dataset,
                              const TrainSettings& train);

int run_cli(int argc, const char* const* argv);

}  // namespace perceiver::cli
