#pragma once

// Versioned binary checkpoint: the resolved configuration text plus every
// named parameter table (dtype tag, shape, raw values in native byte order).
// Saving and re-loading restores parameters bit-exactly. Loading is strict:
// the table set must match the model's registry one-to-one, by name, shape
// and dtype — anything else means the checkpoint belongs to a different
// configuration and is rejected.

#include "perceiver/common.hpp"
#include "perceiver/tensor.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace perceiver::io {

namespace ckpt_detail {

constexpr char kMagic[4] = {'P', 'R', 'C', 'V'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
constexpr std::uint8_t dtype_tag();
template <>
constexpr std::uint8_t dtype_tag<float>() {
  return 4;
}
template <>
constexpr std::uint8_t dtype_tag<double>() {
  return 8;
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace ckpt_detail

template <typename T>
void save_checkpoint(const std::string& path, const std::string& config_text,
                     const ParamSet<T>& params) {
  namespace d = ckpt_detail;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out.write(d::kMagic, 4);
  const std::uint32_t version = d::kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  d::write_u64(out, config_text.size());
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  d::write_u64(out, params.size());
  for (const NamedParam<T>& p : params) {
    d::write_u64(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const std::uint8_t tag = d::dtype_tag<T>();
    out.write(reinterpret_cast<const char*>(&tag), 1);
    d::write_u64(out, p.tensor.ndim());
    for (std::size_t dim : p.tensor.shape()) d::write_u64(out, dim);
    out.write(reinterpret_cast<const char*>(p.tensor.data()),
              static_cast<std::streamsize>(p.tensor.size() * sizeof(T)));
  }
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

// Loads into an already-built model's parameter set; returns the stored
// configuration text.
template <typename T>
std::string load_checkpoint(const std::string& path, ParamSet<T>& params) {
  namespace d = ckpt_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, d::kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: '" + path + "' is not a checkpoint file");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != d::kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  std::string config_text(d::read_u64(in), '\0');
  in.read(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  const std::uint64_t count = d::read_u64(in);
  if (count != params.size())
    throw config_error("checkpoint: holds " + std::to_string(count) + " tables, model has " +
                       std::to_string(params.size()));
  std::map<std::string, NamedParam<T>*> by_name;
  for (NamedParam<T>& p : params) by_name[p.name] = &p;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name(d::read_u64(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    std::uint8_t tag = 0;
    in.read(reinterpret_cast<char*>(&tag), 1);
    if (tag != d::dtype_tag<T>())
      throw config_error("checkpoint: table '" + name + "' has a different scalar type");
    std::vector<std::size_t> shape(d::read_u64(in));
    for (std::size_t& dim : shape) dim = d::read_u64(in);
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw config_error("checkpoint: table '" + name + "' is not a model parameter");
    NamedParam<T>& p = *it->second;
    if (p.tensor.shape() != shape)
      throw config_error("checkpoint: table '" + name + "' has a mismatched shape");
    in.read(reinterpret_cast<char*>(p.tensor.data()),
            static_cast<std::streamsize>(p.tensor.size() * sizeof(T)));
    if (!in) throw std::runtime_error("checkpoint: '" + path + "' is truncated");
  }
  return config_text;
}

}  // namespace perceiver::io
