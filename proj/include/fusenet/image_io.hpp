#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fusenet/tensor.hpp"

namespace fusenet {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  friend bool operator==(const Image&, const Image&) = default;
};

enum class ImageFormat { Png, Ppm };

/// Picks the format from the file extension (".png" or ".ppm"); anything else is a ConfigError.
ImageFormat format_for_path(const std::string& path);

std::vector<std::uint8_t> encode_ppm(const Image& img);
Image decode_ppm(std::span<const std::uint8_t> bytes);

void write_image(const std::string& path, const Image& img);
void write_image(const std::string& path, const Image& img, ImageFormat format);
/// Reads PNG or binary PPM (P6), detected from the file signature.
Image read_image(const std::string& path);

/// Bilinear resize to size x size and scaling to [0, 1]; result is [3, size, size].
template <typename T>
Tensor<T> image_to_tensor(const Image& img, std::size_t size);

/// Inverse of image_to_tensor for a [3, H, W] tensor, clamping to [0, 1].
template <typename T>
Image tensor_to_image(const Tensor<T>& t);

}  // namespace fusenet
