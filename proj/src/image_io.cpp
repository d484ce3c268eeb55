#include "fusenet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

#include "byte_io.hpp"

namespace fusenet {

ImageFormat format_for_path(const std::string& path) {
  auto ends_with = [&](const std::string& ext) {
    return path.size() >= ext.size() && std::equal(ext.rbegin(), ext.rend(), path.rbegin(), [](char a, char b) {
             return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
           });
  };
  if (ends_with(".png")) return ImageFormat::Png;
  if (ends_with(".ppm")) return ImageFormat::Ppm;
  throw ConfigError("unsupported image extension: " + path);
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    if (tok.empty()) throw FormatError("ppm: truncated header");
    return tok;
  };
  if (next_token() != "P6") throw FormatError("ppm: only binary P6 is supported");
  Image img;
  try {
    img.width = std::stoul(next_token());
    img.height = std::stoul(next_token());
    if (std::stoul(next_token()) != 255) throw UnsupportedFormatError("ppm: only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw FormatError("ppm: bad header number");
  }
  ++pos;  // single whitespace after maxval
  const std::size_t need = img.width * img.height * 3;
  if (bytes.size() < pos + need) throw FormatError("ppm: truncated pixel data");
  img.rgb.assign(bytes.begin() + pos, bytes.begin() + pos + need);
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

void write_png(const std::string& path, const Image& img) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: write failed for " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.rgb.data() + y * img.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("png: allocation failed");
  }
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: decode failed for " + path);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.rgb.resize(img.width * img.height * 3);
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.rgb.data() + y * img.width * 3;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace

void write_image(const std::string& path, const Image& img) { write_image(path, img, format_for_path(path)); }

void write_image(const std::string& path, const Image& img, ImageFormat format) {
  if (img.rgb.size() != img.width * img.height * 3) throw DimensionError("image buffer does not match its size");
  if (format == ImageFormat::Png) {
    write_png(path, img);
  } else {
    detail::write_file(path, encode_ppm(img));
  }
}

Image read_image(const std::string& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return read_png(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  throw UnsupportedFormatError("unrecognized image format: " + path);
}

template <typename T>
Tensor<T> image_to_tensor(const Image& img, std::size_t size) {
  if (img.width == 0 || img.height == 0) throw DimensionError("empty image");
  Tensor<T> out({3, size, size});
  const double sy = size > 1 ? static_cast<double>(img.height - 1) / static_cast<double>(size - 1) : 0.0;
  const double sx = size > 1 ? static_cast<double>(img.width - 1) / static_cast<double>(size - 1) : 0.0;
  for (std::size_t y = 0; y < size; ++y) {
    const double fy = static_cast<double>(y) * sy;
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < size; ++x) {
      const double fx = static_cast<double>(x) * sx;
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        auto px = [&](std::size_t yy, std::size_t xx) { return img.rgb[(yy * img.width + xx) * 3 + c] / 255.0; };
        const double top = px(y0, x0) * (1 - tx) + px(y0, x1) * tx;
        const double bottom = px(y1, x0) * (1 - tx) + px(y1, x1) * tx;
        out[(c * size + y) * size + x] = static_cast<T>(top * (1 - ty) + bottom * ty);
      }
    }
  }
  return out;
}

template <typename T>
Image tensor_to_image(const Tensor<T>& t) {
  if (t.rank() != 3 || t.dim(0) != 3) throw DimensionError("tensor_to_image expects [3,H,W]");
  Image img{t.dim(2), t.dim(1), {}};
  img.rgb.resize(img.width * img.height * 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        const double v = std::clamp(static_cast<double>(t[(c * img.height + y) * img.width + x]), 0.0, 1.0);
        img.rgb[(y * img.width + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return img;
}

template Tensor<float> image_to_tensor(const Image&, std::size_t);
template Tensor<double> image_to_tensor(const Image&, std::size_t);
template Image tensor_to_image(const Tensor<float>&);
template Image tensor_to_image(const Tensor<double>&);

}  // namespace fusenet
