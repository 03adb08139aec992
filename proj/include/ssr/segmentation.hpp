#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ssr/image.hpp"

namespace ssr {

struct SegmentationParams {
  double smoothing_sigma = 0.8;
  double threshold_k = 100.0 / 255.0;
  // 0 selects (H*W)/1000.
  int min_segment_size = 0;
};

// Per-pixel labels 0..G-1; each segment is 4-connected.
class SegmentMap {
 public:
  SegmentMap() = default;
  // Relabels `labels` contiguously in first-occurrence order.
  SegmentMap(int width, int height, std::vector<int> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  int segment_count() const { return static_cast<int>(pixels_.size()); }
  int label(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<int>& labels() const { return labels_; }
  // Row-major pixel indices of segment g, ascending.
  const std::vector<int>& pixels(int g) const { return pixels_[g]; }

  friend bool operator==(const SegmentMap& a, const SegmentMap& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.labels_ == b.labels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<int> labels_;
  std::vector<std::vector<int>> pixels_;
};

RasterImage gaussian_smooth(const RasterImage& img, double sigma);

SegmentMap oversegment(const RasterImage& img, const SegmentationParams& params = {});

// Sorted neighbour lists; segments are adjacent iff some 4-neighbour pixel
// pair spans them.
std::vector<std::vector<int>> segment_adjacency(const SegmentMap& seg);

// Per-segment mean colour (channels of img).
std::vector<Eigen::VectorXd> segment_means(const SegmentMap& seg, const RasterImage& img);

RasterImage render_false_color(const SegmentMap& seg);

// "SSRSEG01", H and W as little-endian u32, then H*W little-endian i32 labels.
void save_segment_labels(const SegmentMap& seg, const std::filesystem::path& path);
SegmentMap load_segment_labels(const std::filesystem::path& path);

}  // namespace ssr
