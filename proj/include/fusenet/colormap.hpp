#pragma once

#include <array>
#include <cstdint>

namespace fusenet {

struct Rgb {
  std::uint8_t r, g, b;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Fixed palette used to color rendered spectrograms. See docs/formats.md.
const std::array<Rgb, 256>& spectrogram_colormap();

}  // namespace fusenet
