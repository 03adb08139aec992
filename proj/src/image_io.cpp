#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ssr/image.hpp"

namespace ssr {
namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

RasterImage decode_png(const std::vector<unsigned char>& bytes,
                       const std::string& name) {
  // IHDR is mandated to be the first chunk: bit depth at byte 24, colour
  // type at byte 25.
  if (bytes.size() < 33 || std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    throw FormatError("truncated or malformed PNG: " + name);
  }
  const int bit_depth = bytes[24];
  const int color_type = bytes[25];
  if (bit_depth == 16) throw FormatError("16-bit PNG not supported: " + name);

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("invalid PNG " + name + ": " + msg);
  }
  const bool gray = (color_type & PNG_COLOR_MASK_COLOR) == 0 &&
                    color_type != PNG_COLOR_TYPE_PALETTE;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int channels = gray ? 1 : 3;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("invalid PNG " + name + ": " + msg);
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  png_image_free(&image);

  std::vector<double> data(buffer.size());
  std::transform(buffer.begin(), buffer.end(), data.begin(),
                 [](png_byte b) { return b / 255.0; });
  return RasterImage(w, h, channels, std::move(data));
}

RasterImage decode_pnm(const std::vector<unsigned char>& bytes,
                       const std::string& name) {
  const bool color = bytes[1] == '6';
  std::size_t pos = 2;
  auto next_int = [&]() -> long {
    // Skip whitespace and '#' comments.
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw FormatError("malformed PNM header: " + name);
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1L << 30)) throw FormatError("PNM dimension out of range: " + name);
      ++pos;
    }
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (w <= 0 || h <= 0) throw FormatError("PNM with empty dimensions: " + name);
  if (maxval > 255) throw FormatError("16-bit PNM not supported: " + name);
  if (maxval <= 0) throw FormatError("PNM maxval must be positive: " + name);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError("malformed PNM header: " + name);
  }
  ++pos;
  const int channels = color ? 3 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() - pos < n) throw FormatError("truncated PNM data: " + name);
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = std::min(1.0, static_cast<double>(bytes[pos + i]) / maxval);
  }
  return RasterImage(static_cast<int>(w), static_cast<int>(h), channels, std::move(data));
}

}  // namespace

RasterImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  const std::string name = path.string();
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
    return decode_png(bytes, name);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes, name);
  }
  throw FormatError("unsupported image format (expected PNG, P5 or P6): " + name);
}

void save_png(const RasterImage& img, const std::filesystem::path& path) {
  if (img.empty()) throw ArgumentError("save_png: empty image");
  std::vector<png_byte> buffer(img.data().size());
  std::transform(img.data().begin(), img.data().end(), buffer.begin(), quantize);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0,
                               nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write PNG " + path.string() + ": " + msg);
  }
  png_image_free(&image);
}

void save_pnm(const RasterImage& img, const std::filesystem::path& path) {
  if (img.empty()) throw ArgumentError("save_pnm: empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << (img.channels() == 1 ? "P5" : "P6") << '\n'
      << img.width() << ' ' << img.height() << "\n255\n";
  for (double v : img.data()) out.put(static_cast<char>(quantize(v)));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace ssr
