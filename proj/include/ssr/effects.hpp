#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ssr/image.hpp"
#include "ssr/matting.hpp"

namespace ssr {

constexpr int kZoomSamples = 16;

// Background (alpha < 0.5) is averaged over kZoomSamples bilinear samples on
// the segment from each pixel toward `center`, covering `strength` of the
// distance; the result is then composited under the original with alpha.
RasterImage zoom_blur(const RasterImage& img, const AlphaMatte& matte, double strength,
                      Eigen::Vector2d center);

// out = alpha * img + (1 - alpha) * background. A colour with one value is
// broadcast to every channel.
RasterImage object_popup(const RasterImage& img, const AlphaMatte& matte,
                         const std::vector<double>& color);
// The background is resized (bicubic) and channel-converted to match `img`.
RasterImage object_popup(const RasterImage& img, const AlphaMatte& matte,
                         const RasterImage& background);

// Places the matted object with its top-left corner at `offset` in `scene`.
RasterImage compose(const RasterImage& fg_img, const AlphaMatte& matte, const RasterImage& scene,
                    Eigen::Vector2i offset);

// Relief response K*I - sum(K) I + 0.5 of the 3x3 emboss kernel, clamped,
// with the foreground composited back.
RasterImage emboss_background(const RasterImage& img, const AlphaMatte& matte);

}  // namespace ssr
