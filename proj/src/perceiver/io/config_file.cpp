#include "perceiver/io/config_file.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace perceiver::io {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (begin <= s.size()) {
    const std::size_t comma = s.find(',', begin);
    const std::size_t end = comma == std::string::npos ? s.size() : comma;
    const std::string item = trim(s.substr(begin, end - begin));
    if (!item.empty()) parts.push_back(item);
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  return parts;
}

double parse_double(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw config_error("config: key '" + key + "' has non-numeric value '" + s + "'");
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE || s.find('-') != std::string::npos)
    throw config_error("config: key '" + key + "' needs a non-negative integer, got '" + s +
                       "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_text(buf.str());
  } catch (const config_error& e) {
    throw config_error(std::string(e.what()) + " (in " + path + ")");
  }
}

ConfigMap ConfigMap::parse_text(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config: line " + std::to_string(lineno) +
                         " is not of the form key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw config_error("config: line " + std::to_string(lineno) + " has an empty key");
    if (cfg.values_.count(key))
      throw config_error("config: duplicate key '" + key + "'");
    cfg.values_[key] = value;
    cfg.consumed_[key] = false;
  }
  return cfg;
}

bool ConfigMap::has(const std::string& key) const { return values_.count(key) != 0; }

std::string ConfigMap::take(const std::string& key) {
  consumed_[key] = true;
  return values_.at(key);
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) {
  return has(key) ? take(key) : fallback;
}

double ConfigMap::get_double(const std::string& key, double fallback) {
  return has(key) ? parse_double(key, take(key)) : fallback;
}

std::size_t ConfigMap::get_size(const std::string& key, std::size_t fallback) {
  return has(key) ? parse_size(key, take(key)) : fallback;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const std::string v = take(key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw config_error("config: key '" + key + "' needs true or false, got '" + v + "'");
}

std::vector<std::size_t> ConfigMap::get_size_list(const std::string& key,
                                                  std::vector<std::size_t> fallback) {
  if (!has(key)) return fallback;
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(take(key))) out.push_back(parse_size(key, item));
  return out;
}

std::vector<double> ConfigMap::get_double_list(const std::string& key,
                                               std::vector<double> fallback) {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const std::string& item : split_list(take(key))) out.push_back(parse_double(key, item));
  return out;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  values_[key] = value;
  consumed_[key] = false;
}

void ConfigMap::require_all_consumed() const {
  std::string unknown;
  for (const auto& [key, used] : consumed_)
    if (!used) unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty()) throw config_error("config: unknown keys: " + unknown);
}

std::string ConfigMap::serialize() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
  return out.str();
}

}  // namespace perceiver::io
