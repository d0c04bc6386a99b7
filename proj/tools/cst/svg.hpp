#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cst::cli {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::vector<Series>& series);

struct MaskPanel {
  std::string name;
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> truth, predicted;
};

// One row per image: ground truth next to the predicted mask.
std::string mask_panels(const std::vector<MaskPanel>& panels);

}  // namespace cst::cli
