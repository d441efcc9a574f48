#pragma once

// Grayscale image files: binary PGM (P5, maxval 255) is the interchange
// format; 8-bit grayscale PNG is accepted and written by extension.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "vjspoof/error.hpp"
#include "vjspoof/image.hpp"

namespace vjspoof {

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(Errc::file_not_found, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline bool has_png_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png";
}

/// Reads the next header integer of a PNM file, skipping whitespace and comments.
inline long pnm_header_int(const std::vector<std::uint8_t>& buf, std::size_t& pos,
                           const std::string& name) {
  for (;;) {
    while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
    if (pos < buf.size() && buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= buf.size() || !std::isdigit(buf[pos])) {
    throw Error(Errc::malformed_format, name + ": bad PGM header");
  }
  long v = 0;
  while (pos < buf.size() && std::isdigit(buf[pos])) {
    v = v * 10 + (buf[pos] - '0');
    if (v > 1'000'000) throw Error(Errc::malformed_format, name + ": PGM header value too large");
    ++pos;
  }
  return v;
}

inline GrayImage decode_pgm(const std::vector<std::uint8_t>& buf, const std::string& name) {
  std::size_t pos = 2;
  const long w = pnm_header_int(buf, pos, name);
  const long h = pnm_header_int(buf, pos, name);
  const long maxval = pnm_header_int(buf, pos, name);
  if (w < 1 || h < 1) throw Error(Errc::malformed_format, name + ": zero image dimension");
  if (maxval != 255) {
    throw Error(Errc::unsupported_depth, name + ": maxval " + std::to_string(maxval) +
                                             " (only 255 is supported)");
  }
  if (pos >= buf.size() || !std::isspace(buf[pos])) {
    throw Error(Errc::malformed_format, name + ": missing whitespace after maxval");
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t have = buf.size() - pos;
  if (have != need) {
    throw Error(Errc::malformed_format, name + ": header declares " + std::to_string(need) +
                                            " pixels but " + std::to_string(have) +
                                            " data bytes follow");
  }
  std::vector<std::uint8_t> px(buf.begin() + static_cast<std::ptrdiff_t>(pos), buf.end());
  return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(px));
}

inline GrayImage decode_png(const std::vector<std::uint8_t>& buf, const std::string& name) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, buf.data(), buf.size())) {
    throw Error(Errc::malformed_format, name + ": " + image.message);
  }
  if (image.format != PNG_FORMAT_GRAY) {
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    png_image_free(&image);
    throw Error(Errc::unsupported_depth,
                name + (color   ? ": color PNG (grayscale required)"
                        : alpha ? ": PNG with alpha channel"
                                : ": 16-bit PNG (8-bit required)"));
  }
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::malformed_format, name + ": " + msg);
  }
  return GrayImage(static_cast<int>(image.width), static_cast<int>(image.height), std::move(px));
}

}  // namespace detail

/// Loads a binary PGM (P5, maxval 255) or 8-bit grayscale PNG. Color input is
/// rejected rather than converted.
inline GrayImage load_image(const std::filesystem::path& path) {
  const auto buf = detail::read_file_bytes(path);
  const std::string name = path.string();
  static constexpr std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (buf.size() >= 8 && std::equal(std::begin(png_sig), std::end(png_sig), buf.begin())) {
    return detail::decode_png(buf, name);
  }
  if (buf.size() >= 2 && buf[0] == 'P') {
    switch (buf[1]) {
      case '5': return detail::decode_pgm(buf, name);
      case '3':
      case '6': throw Error(Errc::unsupported_depth, name + ": color PPM (grayscale required)");
      case '2': throw Error(Errc::malformed_format, name + ": ASCII PGM (P2) is not supported");
      default: break;
    }
  }
  throw Error(Errc::malformed_format, name + ": not a PGM or PNG file");
}

/// Writes P5 PGM, or PNG when the extension is .png.
inline void save_image(const GrayImage& img, const std::filesystem::path& path) {
  if (detail::has_png_extension(path)) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.data(), 0, nullptr)) {
      throw Error(Errc::io_error, path.string() + ": " + image.message);
    }
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

}  // namespace vjspoof
