#pragma once

// Binary PGM (P5) export for attention maps and other small matrices.
// Values are rescaled per image: min -> 0, max -> 255; a constant image
// (max == min) writes all zeros.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace perceiver::io {

template <typename T>
void write_pgm(const std::string& path, const T* data, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw std::runtime_error("pgm: empty image");
  double lo = static_cast<double>(data[0]), hi = lo;
  for (std::size_t i = 1; i < rows * cols; ++i) {
    const double v = static_cast<double>(data[i]);
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  std::vector<std::uint8_t> pixels(rows * cols, 0);
  if (hi > lo) {
    const double scale = 255.0 / (hi - lo);
    for (std::size_t i = 0; i < rows * cols; ++i)
      pixels[i] =
          static_cast<std::uint8_t>((static_cast<double>(data[i]) - lo) * scale + 0.5);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm: cannot open '" + path + "' for writing");
  out << "P5\n" << cols << " " << rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw std::runtime_error("pgm: write to '" + path + "' failed");
}

}  // namespace perceiver::io
