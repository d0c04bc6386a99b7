#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cst {

// 8-bit binary PGM (P5).
struct GrayImage {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> pixels;
};

void write_pgm(const std::string& path, const GrayImage& image);
GrayImage read_pgm(const std::string& path);

}  // namespace cst
