#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ssr/error.hpp"

namespace ssr {

// H x W x C raster with interleaved samples in [0,1], row-major.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, int channels, double fill = 0.0);
  RasterImage(int width, int height, int channels, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  // Replicate-border access.
  double clamped(int x, int y, int c = 0) const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const RasterImage& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }
  bool same_dims(const RasterImage& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  void clamp01();
  RasterImage channel(int c) const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Top-left origins of square patches over an image of the given size.
struct PatchGrid {
  int patch_size = 3;
  int stride = 1;
  int image_width = 0;
  int image_height = 0;
  std::vector<Eigen::Vector2i> origins;

  // Regular grid with origins at multiples of stride; every patch lies
  // fully inside the image.
  static PatchGrid dense(int image_width, int image_height, int patch_size,
                         int stride);
  std::size_t size() const { return origins.size(); }
};

using FeatureVector = Eigen::VectorXd;

// Paired training sample: low-res feature vector and mean-removed high-res
// pixel patch (row-major).
struct TrainingSample {
  FeatureVector features;
  Eigen::VectorXd high_patch;
};

enum class Role : std::uint8_t { kForeground = 0, kBackground = 1 };

// Per-pixel 0/1 mask, row-major, 1 = foreground.
using BinaryMask = std::vector<std::uint8_t>;

BinaryMask mask_from_image(const RasterImage& img);

const char* role_name(Role role);

// I/O. PNG (8-bit) and binary PPM (P6) / PGM (P5).
RasterImage load_image(const std::filesystem::path& path);
void save_png(const RasterImage& img, const std::filesystem::path& path);
void save_pnm(const RasterImage& img, const std::filesystem::path& path);

// Rec.601 luma; grayscale images are returned unchanged.
RasterImage to_luminance(const RasterImage& img);
RasterImage to_channels(const RasterImage& img, int channels);

RasterImage downsample(const RasterImage& img, int factor);
// Results are clamped to [0,1] unless `clamp` is false (signed data).
RasterImage resize_bicubic(const RasterImage& img, int width, int height, bool clamp = true);
RasterImage upsample_bicubic(const RasterImage& img, int factor, bool clamp = true);

// Same-size cross-correlation with a separable 1-D kernel along x or y,
// replicate border. No clamping (responses are signed).
RasterImage filter_x(const RasterImage& img, std::span<const double> kernel);
RasterImage filter_y(const RasterImage& img, std::span<const double> kernel);

// The four derivative responses (f1..f4) of a single-channel image.
struct FeatureMaps {
  RasterImage dx, dy, dxx, dyy;
};
FeatureMaps feature_maps(const RasterImage& luminance);

// Stacks the four responses over a patch footprint: length 4 * size^2.
FeatureVector patch_features(const FeatureMaps& maps, int x0, int y0, int size);
std::vector<FeatureVector> extract_features(const RasterImage& img,
                                            const PatchGrid& grid);

constexpr double kMaskOverlapThreshold = 0.8;

// Samples `count` (feature, high patch) pairs from a high-res training image.
// Features are computed on the bicubic re-upsampling of the downsampled
// luminance, over the (patch_size*factor)^2 high-res footprint.
std::vector<TrainingSample> sample_training_patches(
    const RasterImage& hi, const BinaryMask& mask, int factor,
    int count, int patch_size, Role role, std::uint64_t rng_seed);

}  // namespace ssr
