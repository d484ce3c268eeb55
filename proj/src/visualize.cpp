#include "fusenet/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace fusenet {

GridShape filter_grid_shape(std::size_t count) {
  if (count == 0) throw ConfigError("no filters to tile");
  GridShape g;
  g.columns = std::min(count, static_cast<std::size_t>(std::ceil(std::sqrt(1.5 * static_cast<double>(count)))));
  g.rows = (count + g.columns - 1) / g.columns;
  return g;
}

template <typename T>
Image filter_grid(const Tensor<T>& weights, std::size_t scale) {
  if (weights.rank() != 4) throw DimensionError("filter_grid expects [K, C, kh, kw] weights", "rank");
  if (scale == 0) throw ConfigError("scale must be >= 1");
  const std::size_t k = weights.dim(0), c = weights.dim(1), kh = weights.dim(2), kw = weights.dim(3);
  const GridShape grid = filter_grid_shape(k);
  const std::size_t th = kh * scale, tw = kw * scale;

  Image img;
  img.width = grid.columns * tw + (grid.columns - 1);
  img.height = grid.rows * th + (grid.rows - 1);
  img.rgb.assign(img.width * img.height * 3, kGridSeparator);

  const std::size_t plane = kh * kw;
  std::vector<double> tile(plane * 3);
  for (std::size_t f = 0; f < k; ++f) {
    const T* w = weights.raw() + f * c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (c == 3) {
        for (std::size_t ch = 0; ch < 3; ++ch) tile[i * 3 + ch] = static_cast<double>(w[ch * plane + i]);
      } else {
        double mean = 0;
        for (std::size_t ch = 0; ch < c; ++ch) mean += static_cast<double>(w[ch * plane + i]);
        mean /= static_cast<double>(c);
        tile[i * 3] = tile[i * 3 + 1] = tile[i * 3 + 2] = mean;
      }
    }
    const auto [lo, hi] = std::minmax_element(tile.begin(), tile.end());
    const double min = *lo, range = *hi - *lo;

    const std::size_t x0 = (f % grid.columns) * (tw + 1), y0 = (f / grid.columns) * (th + 1);
    for (std::size_t y = 0; y < th; ++y) {
      for (std::size_t x = 0; x < tw; ++x) {
        const std::size_t src = ((y / scale) * kw + x / scale) * 3;
        std::uint8_t* dst = &img.rgb[((y0 + y) * img.width + x0 + x) * 3];
        for (std::size_t ch = 0; ch < 3; ++ch) {
          dst[ch] = range > 0 ? static_cast<std::uint8_t>(std::lround((tile[src + ch] - min) / range * 255.0)) : 128;
        }
      }
    }
  }
  return img;
}

std::string merge_curves(const std::vector<std::pair<std::string, std::string>>& named_csv) {
  struct Row {
    std::string loss, accuracy;
  };
  std::vector<std::map<std::size_t, Row>> runs;
  std::size_t last_epoch = 0;
  for (const auto& [name, text] : named_csv) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "epoch,loss,test_accuracy")
      throw FormatError(name + ": expected header epoch,loss,test_accuracy");
    std::map<std::size_t, Row> rows;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto a = line.find(','), b = line.find(',', a + 1);
      if (a == std::string::npos || b == std::string::npos) throw FormatError(name + ": malformed row '" + line + "'");
      std::size_t epoch;
      try {
        epoch = std::stoul(line.substr(0, a));
      } catch (const std::exception&) {
        throw FormatError(name + ": malformed epoch in '" + line + "'");
      }
      rows[epoch] = {line.substr(a + 1, b - a - 1), line.substr(b + 1)};
      last_epoch = std::max(last_epoch, epoch);
    }
    runs.push_back(std::move(rows));
  }
  std::string out = "epoch";
  for (const auto& [name, text] : named_csv) out += "," + name + "_loss," + name + "_test_accuracy";
  out += "\n";
  for (std::size_t e = 1; e <= last_epoch; ++e) {
    out += std::to_string(e);
    for (const auto& rows : runs) {
      const auto it = rows.find(e);
      out += it == rows.end() ? ",," : "," + it->second.loss + "," + it->second.accuracy;
    }
    out += "\n";
  }
  return out;
}

template Image filter_grid(const Tensor<float>&, std::size_t);
template Image filter_grid(const Tensor<double>&, std::size_t);

}  // namespace fusenet
