#include <cmath>

#include "doctest.h"
#include "ssr/random.hpp"
#include "ssr/superres.hpp"
#include "ssr/synthbench.hpp"
#include "test_util.hpp"

using namespace ssr;

namespace {

constexpr int kMag = 3;
constexpr int kFoot = 9;

// Features of a lone high-res patch after the degrade/re-upsample path.
FeatureVector lone_patch_features(const Eigen::VectorXd& high) {
  RasterImage hi(kFoot, kFoot, 1);
  for (int i = 0; i < kFoot * kFoot; ++i) hi.data()[i] = 0.5 + high(i);
  const RasterImage base = upsample_bicubic(downsample(hi, kMag), kMag);
  return patch_features(feature_maps(base), 0, 0, kFoot);
}

// Coupled atoms built through the same feature path, so a patch made of one
// atom has exactly that atom's features.
CoupledDictionary smooth_dictionary(int atoms, std::uint64_t seed) {
  Rng rng(seed);
  CoupledDictionary d;
  d.class_name = "obj";
  d.d_low.resize(4 * kFoot * kFoot, atoms);
  d.d_high.resize(kFoot * kFoot, atoms);
  for (int j = 0; j < atoms; ++j) {
    const double fx = rng.uniform(0.2, 1.2), fy = rng.uniform(0.2, 1.2), ph = rng.uniform(0, 6.28);
    Eigen::VectorXd h(kFoot * kFoot);
    for (int y = 0; y < kFoot; ++y)
      for (int x = 0; x < kFoot; ++x) h(y * kFoot + x) = 0.3 * std::sin(fx * x + fy * y + ph);
    h.array() -= h.mean();
    const FeatureVector f = lone_patch_features(h);
    d.d_low.col(j) = f / f.norm();
    d.d_high.col(j) = h / f.norm();
  }
  d.scaling = 4.0;
  return d;
}

AlphaMatte constant_matte(int w, int h, double a) {
  AlphaMatte m;
  m.alpha = RasterImage(w, h, 1, a);
  return m;
}

}  // namespace

TEST_CASE("psnr") {
  const RasterImage a = ssr::testing::random_image(6, 5, 3, 1);
  CHECK(psnr(a, a) == kPsnrCap);
  RasterImage b(4, 4, 1, 0.5), c(4, 4, 1, 0.6);
  CHECK(psnr(b, c) == doctest::Approx(20.0));
  RasterImage checker(4, 4, 1), inverse(4, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      checker.at(x, y) = (x + y) % 2;
      inverse.at(x, y) = 1 - (x + y) % 2;
    }
  CHECK(psnr(checker, inverse) == doctest::Approx(0.0));
  BinaryMask none(16, 0);
  CHECK_THROWS_AS(psnr(b, c, &none), ArgumentError);
  BinaryMask one(16, 0);
  one[3] = 1;
  c.at(3, 0) = 0.5;
  CHECK(psnr(b, c, &one) == kPsnrCap);
  CHECK_THROWS_AS(psnr(a, b), ArgumentError);
}

TEST_CASE("empty matte leaves the bicubic upsampling") {
  const CoupledDictionary d = smooth_dictionary(12, 1);
  const RasterImage low = ssr::testing::random_image(10, 8, 3, 2);
  const SrResult r = super_resolve_region(low, constant_matte(10, 8, 0.0), d);
  CHECK(r.patches == 0);
  CHECK(r.image == upsample_bicubic(low, 3));
  CHECK(r.image == r.bicubic);
}

TEST_CASE("single-atom round trip") {
  // A 3x3 low patch has only 8 non-DC degrees of freedom, so keep the
  // dictionary small enough for single atoms to stay identifiable.
  const CoupledDictionary d = smooth_dictionary(5, 3);
  SrConfig cfg;
  cfg.lambda = 1e-4;
  for (int j = 0; j < 5; ++j) {
    const Eigen::VectorXd h = d.d_high.col(j) / d.d_high.col(j).norm() * 0.3 * kFoot / 2;
    RasterImage hi(kFoot, kFoot, 1);
    for (int i = 0; i < kFoot * kFoot; ++i) hi.data()[i] = 0.5 + h(i);
    const SrResult r = super_resolve_region(downsample(hi, kMag), constant_matte(3, 3, 1.0), d, cfg);
    REQUIRE(r.patches == 1);
    Eigen::VectorXd out(kFoot * kFoot);
    for (int i = 0; i < kFoot * kFoot; ++i) out(i) = r.image.data()[i];
    out.array() -= out.mean();
    CHECK((out - h).norm() / h.norm() < 0.05);
  }
}

TEST_CASE("selectivity, range, determinism and constant images") {
  const CoupledDictionary d = smooth_dictionary(16, 4);
  const RasterImage low = ssr::testing::random_image(12, 12, 1, 5);
  AlphaMatte matte = constant_matte(12, 12, 0.0);
  for (int y = 0; y < 12; ++y)
    for (int x = 6; x < 12; ++x) matte.alpha.at(x, y) = 1.0;
  const SrResult r = super_resolve_region(low, matte, d);
  const RasterImage bicubic = upsample_bicubic(low, 3);
  std::size_t changed = 0;
  for (int y = 0; y < 36; ++y) {
    for (int x = 0; x < 36; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * 36 + x;
      CHECK(r.region[p] == (x >= 18));
      if (!r.region[p]) CHECK(r.image.data()[p] == bicubic.data()[p]);
      changed += r.image.data()[p] != bicubic.data()[p];
    }
  }
  CHECK(changed > 0);
  for (double v : r.image.data()) CHECK((v >= 0.0 && v <= 1.0));
  CHECK(super_resolve_region(low, matte, d).image == r.image);

  const RasterImage flat(9, 9, 1, 0.37);
  const SrResult f = super_resolve_region(flat, constant_matte(9, 9, 1.0), d);
  for (double v : f.image.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("colour images get the luminance detail on every channel") {
  const CoupledDictionary d = smooth_dictionary(16, 6);
  const RasterImage gray = ssr::testing::random_image(9, 9, 1, 7);
  const RasterImage rgb = to_channels(gray, 3);
  const AlphaMatte matte = constant_matte(9, 9, 1.0);
  const SrResult g = super_resolve_region(gray, matte, d);
  const SrResult c = super_resolve_region(rgb, matte, d);
  for (std::size_t p = 0; p < g.image.pixel_count(); ++p) {
    for (int ch = 0; ch < 3; ++ch) {
      CHECK(c.image.data()[3 * p + ch] == doctest::Approx(g.image.data()[p]).epsilon(1e-9));
    }
  }
}

TEST_CASE("sparse-coding SR beats bicubic on planted texture") {
  const auto atoms = make_stripe_atoms(32, 24, true, 8, 16, 1);
  const auto other = make_stripe_atoms(32, 24, false, 8, 16, 2);
  std::vector<TrainingSample> samples;
  for (int s = 0; s < 4; ++s) {
    SceneLayout layout = random_rect_layout(192, 192, 10 + s);
    layout.amplitude = 0.1;
    const PlantedScene scene = make_planted_scene(atoms, other, layout, 0.0, 20 + s);
    const auto batch = sample_training_patches(scene.image, scene.mask, 3, 500, 3, Role::kForeground, 30 + s);
    samples.insert(samples.end(), batch.begin(), batch.end());
  }
  TrainingConfig tc;
  tc.n_atoms = 64;
  tc.epochs = 3;
  const CoupledDictionary d = train_coupled_dictionary(samples, tc, "obj", Role::kForeground);

  SceneLayout layout = half_split_layout(192, 192);
  layout.amplitude = 0.1;
  const PlantedScene scene = make_planted_scene(atoms, other, layout, 0.0, 99);
  const RasterImage low = downsample(scene.image, 3);
  AlphaMatte matte = constant_matte(64, 64, 0.0);
  for (int y = 0; y < 64; ++y)
    for (int x = 32; x < 64; ++x) matte.alpha.at(x, y) = 1.0;
  SrConfig cfg;
  cfg.lambda = 0.01;
  const SrResult r = super_resolve_region(low, matte, d, cfg);
  const double sr = psnr(r.image, scene.image, &r.region);
  const double bic = psnr(r.bicubic, scene.image, &r.region);
  MESSAGE("psnr sr " << sr << " bicubic " << bic);
  CHECK(sr > bic + 0.5);
}

TEST_CASE("backprojection pulls the result toward the observation") {
  const CoupledDictionary d = smooth_dictionary(16, 8);
  const RasterImage low = ssr::testing::random_image(12, 12, 1, 9);
  const AlphaMatte matte = constant_matte(12, 12, 1.0);
  SrConfig cfg;
  const double before = psnr(downsample(super_resolve_region(low, matte, d, cfg).image, 3), low);
  cfg.backprojection_iterations = 5;
  const double after = psnr(downsample(super_resolve_region(low, matte, d, cfg).image, 3), low);
  CHECK(after > before);
}

TEST_CASE("super-resolution errors") {
  CoupledDictionary d = smooth_dictionary(4, 10);
  const RasterImage low(6, 6, 1, 0.5);
  const AlphaMatte matte = constant_matte(6, 6, 1.0);
  SrConfig cfg;
  cfg.magnification = 2;
  CHECK_THROWS_AS(super_resolve_region(low, matte, d, cfg), ArgumentError);
  CHECK_THROWS_AS(super_resolve_region(low, constant_matte(5, 6, 1.0), d), ArgumentError);
  SrConfig stride;
  stride.stride = 4;
  CHECK_THROWS_AS(super_resolve_region(low, matte, d, stride), ArgumentError);
  d.role = Role::kBackground;
  CHECK_THROWS_AS(super_resolve_region(low, matte, d), ArgumentError);
}
