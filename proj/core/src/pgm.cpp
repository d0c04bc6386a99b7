#include "cst/pgm.hpp"

#include <sstream>

#include "binary_io.hpp"
#include "cst/error.hpp"

namespace cst {

void write_pgm(const std::string& path, const GrayImage& image) {
  if (image.pixels.size() != image.height * image.width) {
    throw Error(ErrorCode::kShapeMismatch, "pgm: pixel count does not match extents");
  }
  std::string header = "P5\n" + std::to_string(image.width) + " " +
                       std::to_string(image.height) + "\n255\n";
  std::vector<char> data(header.begin(), header.end());
  data.insert(data.end(), image.pixels.begin(), image.pixels.end());
  io::write_file(path, data);
}

GrayImage read_pgm(const std::string& path) {
  const auto bytes = io::read_file(path, ErrorCode::kFileNotFound);
  std::string text(bytes.begin(), bytes.end());
  std::istringstream in(text);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic;
  // skip comment lines between header fields
  auto next = [&](std::size_t& v) {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
    in >> v;
  };
  next(w);
  next(h);
  next(maxval);
  if (magic != "P5" || !in || w == 0 || h == 0 || maxval == 0 || maxval > 255) {
    throw Error(ErrorCode::kCorruptHeader, path + ": not an 8-bit P5 PGM");
  }
  in.get();
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() < offset + w * h) {
    throw Error(ErrorCode::kTruncatedPayload, path + ": PGM payload shorter than " +
                                                  std::to_string(w * h) + " bytes");
  }
  GrayImage img{h, w, {}};
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                    bytes.begin() + static_cast<std::ptrdiff_t>(offset + w * h));
  return img;
}

}  // namespace cst
