#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fusenet/image_io.hpp"
#include "fusenet/tensor.hpp"

namespace fusenet {

struct GridShape {
  std::size_t columns = 0;
  std::size_t rows = 0;
};

/// Tile layout for `count` filters: ceil(sqrt(1.5 * count)) columns (at most `count`), as many
/// rows as needed. 96 filters give 12 x 8.
GridShape filter_grid_shape(std::size_t count);

inline constexpr std::uint8_t kGridSeparator = 255;

/// Renders conv weights [K, C, kh, kw] as one image: each filter normalized on its own to
/// [0, 255] (a constant filter becomes mid gray), tiled row-major with 1-pixel separators.
/// Three input channels map to RGB; any other count is shown as the channel mean in gray.
/// `scale` enlarges every filter pixel to scale x scale.
template <typename T>
Image filter_grid(const Tensor<T>& weights, std::size_t scale = 1);

/// Joins per-run metric CSVs (epoch,loss,test_accuracy) into one wide table:
/// epoch,<name>_loss,<name>_test_accuracy,... Runs shorter than the longest leave cells empty.
std::string merge_curves(const std::vector<std::pair<std::string, std::string>>& named_csv);

}  // namespace fusenet
