#include "ssr/effects.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ssr {

namespace {

void check_matte(const RasterImage& img, const AlphaMatte& matte) {
  if (matte.alpha.width() != img.width() || matte.alpha.height() != img.height() ||
      matte.alpha.channels() != 1) {
    throw ArgumentError("matte is " + std::to_string(matte.alpha.width()) + "x" +
                        std::to_string(matte.alpha.height()) + ", image is " +
                        std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  if (img.empty()) throw ArgumentError("empty image");
}

double bilinear(const RasterImage& img, double x, double y, int c) {
  x = std::clamp(x, 0.0, img.width() - 1.0);
  y = std::clamp(y, 0.0, img.height() - 1.0);
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
  return (1 - fy) * ((1 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c)) +
         fy * ((1 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c));
}

// alpha * img + (1 - alpha) * back, per pixel.
RasterImage composite(const RasterImage& img, const RasterImage& alpha, const RasterImage& back) {
  RasterImage out(img.width(), img.height(), img.channels());
  const int C = img.channels();
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const double a = alpha.data()[p];
    for (int c = 0; c < C; ++c) {
      out.data()[p * C + c] = a * img.data()[p * C + c] + (1.0 - a) * back.data()[p * C + c];
    }
  }
  return out;
}

}  // namespace

RasterImage zoom_blur(const RasterImage& img, const AlphaMatte& matte, double strength,
                      Eigen::Vector2d center) {
  check_matte(img, matte);
  if (!(strength >= 0.0)) throw ArgumentError("zoom strength must be >= 0");
  if (strength == 0.0) return img;
  const int W = img.width(), H = img.height(), C = img.channels();
  RasterImage back = img;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (matte.alpha.at(x, y) >= 0.5) continue;
      const double dx = (center.x() - x) * strength, dy = (center.y() - y) * strength;
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int i = 0; i < kZoomSamples; ++i) {
          const double t = static_cast<double>(i) / (kZoomSamples - 1);
          s += bilinear(img, x + t * dx, y + t * dy, c);
        }
        back.at(x, y, c) = std::clamp(s / kZoomSamples, 0.0, 1.0);
      }
    }
  }
  return composite(img, matte.alpha, back);
}

RasterImage object_popup(const RasterImage& img, const AlphaMatte& matte,
                         const std::vector<double>& color) {
  check_matte(img, matte);
  const int C = img.channels();
  if (color.size() != 1 && color.size() != static_cast<std::size_t>(C)) {
    throw ArgumentError("background colour needs 1 or " + std::to_string(C) + " values");
  }
  RasterImage back(img.width(), img.height(), C);
  for (std::size_t p = 0; p < back.pixel_count(); ++p) {
    for (int c = 0; c < C; ++c) {
      back.data()[p * C + c] = std::clamp(color.size() == 1 ? color[0] : color[c], 0.0, 1.0);
    }
  }
  return composite(img, matte.alpha, back);
}

RasterImage object_popup(const RasterImage& img, const AlphaMatte& matte,
                         const RasterImage& background) {
  check_matte(img, matte);
  if (background.empty()) throw ArgumentError("empty background image");
  RasterImage back = to_channels(background, img.channels());
  if (!back.same_dims(img)) back = resize_bicubic(back, img.width(), img.height());
  return composite(img, matte.alpha, back);
}

RasterImage compose(const RasterImage& fg_img, const AlphaMatte& matte, const RasterImage& scene,
                    Eigen::Vector2i offset) {
  check_matte(fg_img, matte);
  if (offset.x() < 0 || offset.y() < 0 || offset.x() + fg_img.width() > scene.width() ||
      offset.y() + fg_img.height() > scene.height()) {
    throw ArgumentError("object of " + std::to_string(fg_img.width()) + "x" +
                        std::to_string(fg_img.height()) + " at (" + std::to_string(offset.x()) +
                        ", " + std::to_string(offset.y()) + ") does not fit in a " +
                        std::to_string(scene.width()) + "x" + std::to_string(scene.height()) +
                        " scene");
  }
  const RasterImage fg = to_channels(fg_img, scene.channels());
  RasterImage out = scene;
  const int C = scene.channels();
  for (int y = 0; y < fg.height(); ++y) {
    for (int x = 0; x < fg.width(); ++x) {
      const double a = matte.alpha.at(x, y);
      for (int c = 0; c < C; ++c) {
        double& v = out.at(offset.x() + x, offset.y() + y, c);
        v = a * fg.at(x, y, c) + (1.0 - a) * v;
      }
    }
  }
  return out;
}

RasterImage emboss_background(const RasterImage& img, const AlphaMatte& matte) {
  check_matte(img, matte);
  static constexpr double kKernel[3][3] = {{-2, -1, 0}, {-1, 1, 1}, {0, 1, 2}};
  constexpr double kSum = 1.0;
  const int W = img.width(), H = img.height(), C = img.channels();
  RasterImage back(W, H, C);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) s += kKernel[i][j] * img.clamped(x + j - 1, y + i - 1, c);
        back.at(x, y, c) = std::clamp(s - kSum * img.at(x, y, c) + 0.5, 0.0, 1.0);
      }
    }
  }
  return composite(img, matte.alpha, back);
}

}  // namespace ssr
