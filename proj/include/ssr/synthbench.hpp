#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ssr/dictlearn.hpp"
#include "ssr/gmtl.hpp"
#include "ssr/image.hpp"
#include "ssr/sparse.hpp"

namespace ssr {

struct Rect {
  int x = 0, y = 0, width = 0, height = 0;
  bool contains(int px, int py) const {
    return px >= x && py >= y && px < x + width && py < y + height;
  }
  bool overlaps(const Rect& o) const {
    return x < o.x + o.width && o.x < x + width && y < o.y + o.height && o.y < y + height;
  }
};

// Foreground rectangles on a background canvas. Atoms are tiled on a grid
// of `tile`-sized cells; each cell is base + a sparse combination of
// `atoms_per_tile` atoms of its role.
struct SceneLayout {
  int width = 64;
  int height = 64;
  std::vector<Rect> foreground;
  int tile = 0;  // 0 selects the atom size
  int atoms_per_tile = 2;
  double amplitude = 0.05;
  double fg_base = 0.6;
  double bg_base = 0.35;
  // Share one combination per tile row (fg) and per tile column (bg), so
  // stripe-like atoms tile without seams across their stripes.
  bool banded = true;
};

SceneLayout half_split_layout(int width, int height);
// One foreground rectangle with sides in [size/3, 2*size/3] at a random position.
SceneLayout random_rect_layout(int width, int height, std::uint64_t seed);

struct PlantedScene {
  RasterImage image;  // grayscale
  BinaryMask mask;    // 1 = foreground
};

// Square signed pixel patch, indexed (row, column).
using PatchAtom = Eigen::MatrixXd;

// Atoms share one size. Overlapping foreground rectangles are rejected.
PlantedScene make_planted_scene(const std::vector<PatchAtom>& fg_atoms,
                                const std::vector<PatchAtom>& bg_atoms,
                                const SceneLayout& layout, double noise_sigma,
                                std::uint64_t seed);

// Zero-mean unit-norm stripe atoms: horizontal stripes vary down the patch,
// vertical stripes across it. Each atom is a random mix of sinusoids with
// periods in [min_period, max_period] pixels.
std::vector<PatchAtom> make_stripe_atoms(int count, int size, bool horizontal,
                                         double min_period, double max_period,
                                         std::uint64_t seed);

// Pixel replication; downsample() by the same factor inverts it exactly.
RasterImage replicate_upsample(const RasterImage& img, int factor);
BinaryMask replicate_mask(const BinaryMask& mask, int width, int height, int factor);

struct PlantedTrainingConfig {
  int scenes = 3;
  int scene_size = 64;
  int samples_per_role = 2000;
  double noise_sigma = 0.01;
  TrainingConfig training;
};

struct PlantedDictionaries {
  CoupledDictionary fg;
  CoupledDictionary bg;
};

// Trains a fg/bg dictionary pair on planted low-res scenes. The training
// high-res images are the scenes replicated by the magnification, so the
// training low-res images equal the scenes exactly.
PlantedDictionaries train_planted_dictionaries(const std::vector<PatchAtom>& fg_atoms,
                                               const std::vector<PatchAtom>& bg_atoms,
                                               const std::string& class_name,
                                               const PlantedTrainingConfig& cfg,
                                               std::uint64_t seed);

// Fraction of pixels where the predicted mask equals the truth.
double mask_accuracy(const BinaryMask& predicted, const BinaryMask& truth);

// Bisection on lambda over sum_g max(0, ||x_g|| - lambda) = tau.
Eigen::VectorXd oracle_l12_projection(const Eigen::VectorXd& x, const GroupIndex& groups,
                                      double tau, int steps = 200);

// Lasso through the split form a = u - v, u, v >= 0: a smooth bound-
// constrained problem solved by accelerated projected gradient with
// restarts. Slow and independent of coordinate descent.
Eigen::VectorXd oracle_lasso(const Eigen::VectorXd& y, const DictionaryMatrix& d,
                             double lambda, int max_iter = 1000000);

// Penalized form min ||Y - D W||_F^2 + mu * sum_g ||W_g||_F by FISTA.
Eigen::MatrixXd oracle_group_lasso_penalized(const Eigen::MatrixXd& Y, const DictionaryMatrix& d,
                                             const GroupIndex& groups, double mu,
                                             int max_iter = 200000, double tol = 1e-14);

// Constrained GMTL solved through the penalized oracle: bisects mu until the
// solution's l12 norm matches C (or returns the unconstrained fit).
Eigen::MatrixXd oracle_gmtl(const Eigen::MatrixXd& Y, const DictionaryMatrix& d,
                            const GroupIndex& groups, double C);

}  // namespace ssr
