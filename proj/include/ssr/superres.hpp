#pragma once

#include <optional>

#include "ssr/dictlearn.hpp"
#include "ssr/image.hpp"
#include "ssr/matting.hpp"

namespace ssr {

struct SrConfig {
  int magnification = 3;
  int patch_size = 3;
  int stride = 1;  // low-res pixels between patch origins
  double lambda = 0.1;
  // A patch is reconstructed when its mean alpha is at least this; a
  // high-res pixel belongs to the region when its low-res alpha is.
  double threshold = 0.5;
  int backprojection_iterations = 0;
};

struct SrResult {
  RasterImage image;
  RasterImage bicubic;
  BinaryMask region;  // high-res pixels that may differ from the bicubic base
  int patches = 0;
};

// Sparse-coding SR with the foreground dictionary inside the matted region;
// everything else is the bicubic upsampling of `low`.
SrResult super_resolve_region(const RasterImage& low, const AlphaMatte& matte,
                              const CoupledDictionary& fg_dict, const SrConfig& cfg = {});

// High-res region mask: pixel (X, Y) is inside when alpha(X/mag, Y/mag) >= threshold.
BinaryMask sr_region(const RasterImage& alpha, int magnification, double threshold);

constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) over all channels of the masked pixels, capped at kPsnrCap.
double psnr(const RasterImage& a, const RasterImage& b, const BinaryMask* mask = nullptr);

}  // namespace ssr
