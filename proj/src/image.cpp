#include "ssr/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "ssr/random.hpp"

namespace ssr {

RasterImage::RasterImage(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || (channels != 1 && channels != 3)) {
    throw ArgumentError("RasterImage: invalid shape " + std::to_string(width) +
                        "x" + std::to_string(height) + "x" +
                        std::to_string(channels));
  }
  data_.assign(pixel_count() * channels, fill);
}

RasterImage::RasterImage(int width, int height, int channels,
                         std::vector<double> data)
    : RasterImage(width, height, channels) {
  if (data.size() != data_.size()) {
    throw ArgumentError("RasterImage: data length " +
                        std::to_string(data.size()) + " does not match shape");
  }
  data_ = std::move(data);
}

double RasterImage::clamped(int x, int y, int c) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return at(x, y, c);
}

void RasterImage::clamp01() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

RasterImage RasterImage::channel(int c) const {
  RasterImage out(width_, height_, 1);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    out.data_[i] = data_[i * channels_ + c];
  }
  return out;
}

PatchGrid PatchGrid::dense(int image_width, int image_height, int patch_size,
                           int stride) {
  if (patch_size < 1 || stride < 1) {
    throw ArgumentError("PatchGrid: patch_size and stride must be >= 1");
  }
  PatchGrid grid;
  grid.patch_size = patch_size;
  grid.stride = stride;
  grid.image_width = image_width;
  grid.image_height = image_height;
  for (int y = 0; y + patch_size <= image_height; y += stride) {
    for (int x = 0; x + patch_size <= image_width; x += stride) {
      grid.origins.emplace_back(x, y);
    }
  }
  return grid;
}

const char* role_name(Role role) {
  return role == Role::kForeground ? "fg" : "bg";
}

BinaryMask mask_from_image(const RasterImage& img) {
  const RasterImage lum = to_luminance(img);
  BinaryMask mask(lum.pixel_count());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = lum.data()[i] > 0.5 ? 1 : 0;
  }
  return mask;
}

RasterImage to_luminance(const RasterImage& img) {
  if (img.channels() == 1) return img;
  RasterImage out(img.width(), img.height(), 1);
  const auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    dst[i] = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
  }
  out.clamp01();
  return out;
}

RasterImage to_channels(const RasterImage& img, int channels) {
  if (img.channels() == channels) return img;
  if (channels == 1) return to_luminance(img);
  RasterImage out(img.width(), img.height(), 3);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) out.data()[3 * i + c] = img.data()[i];
  }
  return out;
}

RasterImage downsample(const RasterImage& img, int factor) {
  if (factor < 2) throw ArgumentError("downsample: factor must be >= 2");
  const int w = img.width() / factor;
  const int h = img.height() / factor;
  if (w == 0 || h == 0) {
    throw ArgumentError("downsample: image smaller than factor");
  }
  const int ch = img.channels();
  RasterImage out(w, h, ch);
  const double inv = 1.0 / (factor * factor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double sum = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) {
            sum += img.at(x * factor + dx, y * factor + dy, c);
          }
        }
        out.at(x, y, c) = sum * inv;
      }
    }
  }
  return out;
}

namespace {

// Keys cubic convolution kernel, a = -0.5.
double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};

std::vector<Taps> bicubic_taps(int src_size, int dst_size) {
  std::vector<Taps> taps(dst_size);
  const double scale = static_cast<double>(src_size) / dst_size;
  for (int i = 0; i < dst_size; ++i) {
    const double s = (i + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(s));
    const double t = s - base;
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
      taps[i].index[k] = std::clamp(base - 1 + k, 0, src_size - 1);
      taps[i].weight[k] = cubic_weight(t - (k - 1));
      total += taps[i].weight[k];
    }
    for (double& w : taps[i].weight) w /= total;
  }
  return taps;
}

}  // namespace

RasterImage resize_bicubic(const RasterImage& img, int width, int height, bool clamp) {
  if (img.empty() || width < 1 || height < 1) {
    throw ArgumentError("resize_bicubic: empty source or target");
  }
  const int ch = img.channels();
  const auto tx = bicubic_taps(img.width(), width);
  const auto ty = bicubic_taps(img.height(), height);

  RasterImage horiz(width, img.height(), ch);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < ch; ++c) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) v += tx[x].weight[k] * img.at(tx[x].index[k], y, c);
        horiz.at(x, y, c) = v;
      }
    }
  }
  RasterImage out(width, height, ch);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < ch; ++c) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) v += ty[y].weight[k] * horiz.at(x, ty[y].index[k], c);
        out.at(x, y, c) = v;
      }
    }
  }
  if (clamp) out.clamp01();
  return out;
}

RasterImage upsample_bicubic(const RasterImage& img, int factor, bool clamp) {
  if (factor < 2) throw ArgumentError("upsample_bicubic: factor must be >= 2");
  return resize_bicubic(img, img.width() * factor, img.height() * factor, clamp);
}

RasterImage filter_x(const RasterImage& img, std::span<const double> kernel) {
  const int half = static_cast<int>(kernel.size()) / 2;
  RasterImage out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        double v = 0.0;
        for (int k = 0; k < static_cast<int>(kernel.size()); ++k) {
          v += kernel[k] * img.clamped(x + k - half, y, c);
        }
        out.at(x, y, c) = v;
      }
    }
  }
  return out;
}

RasterImage filter_y(const RasterImage& img, std::span<const double> kernel) {
  const int half = static_cast<int>(kernel.size()) / 2;
  RasterImage out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        double v = 0.0;
        for (int k = 0; k < static_cast<int>(kernel.size()); ++k) {
          v += kernel[k] * img.clamped(x, y + k - half, c);
        }
        out.at(x, y, c) = v;
      }
    }
  }
  return out;
}

FeatureMaps feature_maps(const RasterImage& luminance) {
  if (luminance.channels() != 1) {
    throw ArgumentError("feature_maps: expected a single-channel image");
  }
  static constexpr std::array<double, 3> kFirst{-1.0, 0.0, 1.0};
  static constexpr std::array<double, 5> kSecond{1.0, 0.0, -2.0, 0.0, 1.0};
  return {filter_x(luminance, kFirst), filter_y(luminance, kFirst),
          filter_x(luminance, kSecond), filter_y(luminance, kSecond)};
}

FeatureVector patch_features(const FeatureMaps& maps, int x0, int y0, int size) {
  const int w = maps.dx.width();
  const int h = maps.dx.height();
  if (x0 < 0 || y0 < 0 || x0 + size > w || y0 + size > h) {
    throw ArgumentError("patch_features: patch at (" + std::to_string(x0) + "," +
                        std::to_string(y0) + ") size " + std::to_string(size) +
                        " exceeds image bounds");
  }
  const int area = size * size;
  FeatureVector f(4 * area);
  const RasterImage* responses[4] = {&maps.dx, &maps.dy, &maps.dxx, &maps.dyy};
  for (int r = 0; r < 4; ++r) {
    for (int dy = 0; dy < size; ++dy) {
      for (int dx = 0; dx < size; ++dx) {
        f(r * area + dy * size + dx) = responses[r]->at(x0 + dx, y0 + dy);
      }
    }
  }
  return f;
}

std::vector<FeatureVector> extract_features(const RasterImage& img,
                                            const PatchGrid& grid) {
  if (grid.image_width != img.width() || grid.image_height != img.height()) {
    throw ArgumentError("extract_features: grid built for a different image size");
  }
  const FeatureMaps maps = feature_maps(to_luminance(img));
  std::vector<FeatureVector> out;
  out.reserve(grid.size());
  for (const auto& o : grid.origins) {
    out.push_back(patch_features(maps, o.x(), o.y(), grid.patch_size));
  }
  return out;
}

std::vector<TrainingSample> sample_training_patches(
    const RasterImage& hi, const BinaryMask& mask, int factor, int count,
    int patch_size, Role role, std::uint64_t rng_seed) {
  if (mask.size() != hi.pixel_count()) {
    throw ArgumentError("sample_training_patches: mask size does not match image");
  }
  if (count <= 0) throw ArgumentError("sample_training_patches: count must be > 0");
  if (patch_size < 1) throw ArgumentError("sample_training_patches: patch_size must be >= 1");

  const RasterImage lum = to_luminance(hi);
  const RasterImage low = downsample(lum, factor);
  const RasterImage base = upsample_bicubic(low, factor);
  const int hw = base.width();
  const int hh = base.height();
  const FeatureMaps maps = feature_maps(base);

  // Summed-area table over the (cropped) role indicator.
  const std::uint8_t want = role == Role::kForeground ? 1 : 0;
  std::vector<int> sat(static_cast<std::size_t>(hw + 1) * (hh + 1), 0);
  auto sat_at = [&](int x, int y) -> int& {
    return sat[static_cast<std::size_t>(y) * (hw + 1) + x];
  };
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      const int in = mask[static_cast<std::size_t>(y) * hi.width() + x] == want;
      sat_at(x + 1, y + 1) = in + sat_at(x, y + 1) + sat_at(x + 1, y) - sat_at(x, y);
    }
  }

  const int foot = patch_size * factor;
  const double need = kMaskOverlapThreshold * foot * foot;
  std::vector<Eigen::Vector2i> candidates;
  for (int y = 0; y + patch_size <= low.height(); ++y) {
    for (int x = 0; x + patch_size <= low.width(); ++x) {
      const int x0 = x * factor, y0 = y * factor;
      const int inside = sat_at(x0 + foot, y0 + foot) - sat_at(x0, y0 + foot) -
                         sat_at(x0 + foot, y0) + sat_at(x0, y0);
      if (inside >= need) candidates.emplace_back(x0, y0);
    }
  }
  if (candidates.empty()) {
    throw SamplingError(std::string("sample_training_patches: no valid ") +
                        role_name(role) + " patch location (region too small)");
  }

  Rng rng(rng_seed);
  std::vector<Eigen::Vector2i> chosen;
  chosen.reserve(count);
  if (static_cast<std::size_t>(count) <= candidates.size()) {
    // Partial Fisher-Yates: distinct locations.
    for (int i = 0; i < count; ++i) {
      const std::size_t j = i + rng.index(candidates.size() - i);
      std::swap(candidates[i], candidates[j]);
      chosen.push_back(candidates[i]);
    }
  } else {
    for (int i = 0; i < count; ++i) chosen.push_back(candidates[rng.index(candidates.size())]);
  }

  std::vector<TrainingSample> samples;
  samples.reserve(count);
  for (const auto& o : chosen) {
    TrainingSample s;
    s.features = patch_features(maps, o.x(), o.y(), foot);
    s.high_patch.resize(foot * foot);
    for (int dy = 0; dy < foot; ++dy) {
      for (int dx = 0; dx < foot; ++dx) {
        s.high_patch(dy * foot + dx) = lum.at(o.x() + dx, o.y() + dy);
      }
    }
    s.high_patch.array() -= s.high_patch.mean();
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace ssr
