#include "ssr/superres.hpp"

#include <algorithm>
#include <cmath>

namespace ssr {

BinaryMask sr_region(const RasterImage& alpha, int magnification, double threshold) {
  const int W = alpha.width() * magnification, H = alpha.height() * magnification;
  BinaryMask region(static_cast<std::size_t>(W) * H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      region[static_cast<std::size_t>(y) * W + x] =
          alpha.at(x / magnification, y / magnification) >= threshold;
    }
  }
  return region;
}

namespace {

void check_inputs(const RasterImage& low, const AlphaMatte& matte, const CoupledDictionary& d,
                  const SrConfig& cfg) {
  if (d.role != Role::kForeground) {
    throw ArgumentError("super-resolution needs a foreground dictionary, got " +
                        std::string(role_name(d.role)));
  }
  if (cfg.magnification != d.magnification || cfg.patch_size != d.patch_size) {
    throw ArgumentError("dictionary was trained for magnification " +
                        std::to_string(d.magnification) + " and patch size " +
                        std::to_string(d.patch_size) + ", config asks for " +
                        std::to_string(cfg.magnification) + " and " +
                        std::to_string(cfg.patch_size));
  }
  const int foot = cfg.patch_size * cfg.magnification;
  if (d.p_low() != 4 * foot * foot || d.p_high() != foot * foot) {
    throw ArgumentError("dictionary block sizes do not match its patch size");
  }
  if (cfg.stride < 1 || cfg.stride > cfg.patch_size) {
    throw ArgumentError("stride must be in [1, patch_size]");
  }
  if (!(cfg.lambda > 0.0)) throw ArgumentError("lambda must be > 0");
  if (cfg.backprojection_iterations < 0) {
    throw ArgumentError("backprojection iterations must be >= 0");
  }
  if (matte.alpha.width() != low.width() || matte.alpha.height() != low.height() ||
      matte.alpha.channels() != 1) {
    throw ArgumentError("matte must be single-channel at the low-res size");
  }
  if (low.channels() != 1 && low.channels() != 3) {
    throw ArgumentError("super-resolution expects a grayscale or RGB image");
  }
}

}  // namespace

SrResult super_resolve_region(const RasterImage& low, const AlphaMatte& matte,
                              const CoupledDictionary& fg_dict, const SrConfig& cfg) {
  check_inputs(low, matte, fg_dict, cfg);
  const int mag = cfg.magnification, ps = cfg.patch_size, foot = ps * mag;

  SrResult out;
  out.bicubic = upsample_bicubic(low, mag);
  out.region = sr_region(matte.alpha, mag, cfg.threshold);
  const RasterImage low_lum = to_luminance(low);
  const RasterImage base = upsample_bicubic(low_lum, mag);
  const int W = base.width();

  std::vector<Eigen::Vector2i> selected;
  if (low.width() >= ps && low.height() >= ps) {
    for (const auto& o : PatchGrid::dense(low.width(), low.height(), ps, cfg.stride).origins) {
      double a = 0.0;
      for (int dy = 0; dy < ps; ++dy)
        for (int dx = 0; dx < ps; ++dx) a += matte.alpha.at(o.x() + dx, o.y() + dy);
      if (a / (ps * ps) >= cfg.threshold) selected.push_back(o);
    }
  }
  out.patches = static_cast<int>(selected.size());

  const FeatureMaps maps = feature_maps(base);
  const LassoSolver solver(fg_dict.d_low);
  std::vector<Eigen::VectorXd> synthesized(selected.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const int x0 = selected[i].x() * mag, y0 = selected[i].y() * mag;
    const FeatureVector f = patch_features(maps, x0, y0, foot);
    const SparseCode code = solver.solve(f, {cfg.lambda, 1e-6, 1000});
    double dc = 0.0;
    for (int dy = 0; dy < foot; ++dy)
      for (int dx = 0; dx < foot; ++dx) dc += base.at(x0 + dx, y0 + dy);
    synthesized[i] = (fg_dict.d_high * code.coefficients).array() + dc / (foot * foot);
  }

  // Uniform averaging over overlapping footprints, in patch order.
  std::vector<double> sum(base.pixel_count(), 0.0), weight(base.pixel_count(), 0.0);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const int x0 = selected[i].x() * mag, y0 = selected[i].y() * mag;
    for (int dy = 0; dy < foot; ++dy) {
      for (int dx = 0; dx < foot; ++dx) {
        const std::size_t p = static_cast<std::size_t>(y0 + dy) * W + (x0 + dx);
        sum[p] += synthesized[i](dy * foot + dx);
        weight[p] += 1.0;
      }
    }
  }
  RasterImage lum = base;
  for (std::size_t p = 0; p < lum.pixel_count(); ++p) {
    if (out.region[p] && weight[p] > 0.0) lum.data()[p] = sum[p] / weight[p];
  }

  // Pull the reconstruction back toward the low-res observation.
  for (int it = 0; it < cfg.backprojection_iterations; ++it) {
    RasterImage err = low_lum;
    const RasterImage down = downsample(lum, mag);
    for (std::size_t p = 0; p < err.pixel_count(); ++p) err.data()[p] -= down.data()[p];
    const RasterImage up = upsample_bicubic(err, mag, false);
    for (std::size_t p = 0; p < lum.pixel_count(); ++p) {
      if (out.region[p]) lum.data()[p] += up.data()[p];
    }
  }

  out.image = out.bicubic;
  const int C = low.channels();
  for (std::size_t p = 0; p < lum.pixel_count(); ++p) {
    if (!out.region[p]) continue;
    const double delta = lum.data()[p] - base.data()[p];
    for (int c = 0; c < C; ++c) {
      double& v = out.image.data()[p * C + c];
      v = std::clamp((C == 1 ? lum.data()[p] : v + delta), 0.0, 1.0);
    }
  }
  return out;
}

double psnr(const RasterImage& a, const RasterImage& b, const BinaryMask* mask) {
  if (!a.same_shape(b)) throw ArgumentError("psnr: images differ in shape");
  if (mask && mask->size() != a.pixel_count()) throw ArgumentError("psnr: mask size mismatch");
  const int C = a.channels();
  double se = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    if (mask && !(*mask)[p]) continue;
    for (int c = 0; c < C; ++c) {
      const double d = a.data()[p * C + c] - b.data()[p * C + c];
      se += d * d;
    }
    count += C;
  }
  if (count == 0) throw ArgumentError("psnr: empty region");
  const double mse = se / static_cast<double>(count);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace ssr
