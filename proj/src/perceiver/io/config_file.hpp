#pragma once

// Flat key = value configuration files.
//
//   # full-line comment
//   model.latent_count = 512     # trailing comment
//   train.decay_epochs = 84, 102, 114
//
// Keys are consumed by typed getters; after a consumer has read everything it
// understands, require_all_consumed() rejects leftovers so misspelled keys
// fail loudly instead of silently using defaults.

#include "perceiver/common.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace perceiver::io {

class ConfigMap {
 public:
  ConfigMap() = default;

  static ConfigMap parse_file(const std::string& path);  // runtime_error if unreadable
  static ConfigMap parse_text(const std::string& text);  // config_error on bad syntax

  bool has(const std::string& key) const;

  // Getters mark the key consumed; the default is returned when absent.
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<std::size_t> get_size_list(const std::string& key,
                                         std::vector<std::size_t> fallback);
  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback);

  void set(const std::string& key, const std::string& value);

  // Throws config_error naming every key never consumed by a getter.
  void require_all_consumed() const;

  // Sorted "key = value" lines; parse_text(serialize()) round-trips.
  std::string serialize() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::string take(const std::string& key);

  std::map<std::string, std::string> values_;
  std::map<std::string, bool> consumed_;
};

}  // namespace perceiver::io
