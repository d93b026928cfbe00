#pragma once

// Raster container plus PNG (libpng) and binary PGM/PPM readers and writers.

#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "vitor/common.hpp"

namespace vitor {

struct RasterImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;        // 1 (grayscale, e.g. a saliency heatmap) or 3 (RGB)
  std::vector<std::uint8_t> data;  // row-major, interleaved

  void validate() const {
    if (width == 0 || height == 0) throw Error("zero-sized image");
    if (channels != 1 && channels != 3) throw Error("image must have 1 or 3 channels");
    if (data.size() != width * height * channels) throw Error("image data length does not match its shape");
  }

  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return data[(y * width + x) * channels + c]; }

  bool operator==(const RasterImage&) const = default;
};

inline RasterImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw Error("cannot read PNG " + path.string() + ": " + image.message);
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  RasterImage out;
  out.width = image.width;
  out.height = image.height;
  out.channels = color ? 3 : 1;
  out.data.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error("cannot decode PNG " + path.string() + ": " + msg);
  }
  out.validate();
  return out;
}

inline void write_png(const std::filesystem::path& path, const RasterImage& img) {
  img.validate();
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data.data(), 0, nullptr))
    throw Error("cannot encode PNG: " + std::string(image.message));
  std::string bytes(size, '\0');
  if (!png_image_write_to_memory(&image, bytes.data(), &size, 0, img.data.data(), 0, nullptr))
    throw Error("cannot encode PNG: " + std::string(image.message));
  bytes.resize(size);
  write_file_atomic(path, bytes);
}

// Binary P5 (gray) / P6 (RGB), maxval 255.
inline RasterImage read_pnm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string_view(bytes).substr(start, pos - start);
  };
  const auto magic = next_token();
  RasterImage img;
  if (magic == "P5")
    img.channels = 1;
  else if (magic == "P6")
    img.channels = 3;
  else
    throw Error("not a binary PGM/PPM file: " + path.string());
  int maxval = 0;
  if (!parse_int(next_token(), img.width) || !parse_int(next_token(), img.height) || !parse_int(next_token(), maxval) ||
      maxval != 255)
    throw Error("unsupported PNM header in " + path.string());
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = img.width * img.height * img.channels;
  if (pos > bytes.size() || bytes.size() - pos < n) throw Error("truncated PNM file " + path.string());
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  img.validate();
  return img;
}

inline void write_pnm(const std::filesystem::path& path, const RasterImage& img) {
  img.validate();
  std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + ' ' +
                    std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  write_file_atomic(path, out);
}

inline RasterImage read_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  throw Error("unsupported image format: " + path.string());
}

}  // namespace vitor
