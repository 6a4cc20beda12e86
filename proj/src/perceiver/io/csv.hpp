#pragma once

// CSV output. Numbers are printed with %.17g so float64 values round-trip
// exactly and reruns of a deterministic job produce byte-identical files.

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace perceiver::io {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < header.size(); ++i)
      out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      out_ << (i ? "," : "") << format_number(values[i]);
    out_ << "\n";
    out_.flush();  // keep the log usable if a run aborts mid-step
  }

  void text_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

template <typename T>
void write_matrix_csv(const std::string& path, const T* data, std::size_t rows,
                      std::size_t cols) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j)
      out << (j ? "," : "") << format_number(static_cast<double>(data[i * cols + j]));
    out << "\n";
  }
  if (!out) throw std::runtime_error("csv: write to '" + path + "' failed");
}

}  // namespace perceiver::io
