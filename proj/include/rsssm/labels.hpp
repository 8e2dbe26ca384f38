#pragma once

#include <cstdint>
#include <vector>

#include "rsssm/tensor.hpp"

namespace rsssm {

/// Integer class map, row-major over `shape`.
struct LabelTensor {
  Shape shape;
  std::vector<std::int32_t> data;

  std::size_t numel() const { return data.size(); }
};

inline constexpr std::int32_t kIgnoreIndex = 255;

}  // namespace rsssm
