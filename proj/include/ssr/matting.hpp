#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Sparse>

#include "ssr/figure_ground.hpp"
#include "ssr/image.hpp"
#include "ssr/segmentation.hpp"

namespace ssr {

enum class TrimapState : std::uint8_t { kBackground = 0, kForeground = 1, kUnknown = 2 };

struct Trimap {
  int width = 0;
  int height = 0;
  std::vector<TrimapState> state;
  // Scribble value of known pixels; unused (0) for unknown ones.
  std::vector<double> value;

  std::size_t unknown_count() const;
  bool has(TrimapState s) const;
};

struct MattingParams {
  int window_radius = 1;
  double epsilon = 1e-5;
  double constraint_weight = 100.0;
  double tol = 1e-8;
  int max_iter = 2000;
};

struct AlphaMatte {
  RasterImage alpha;  // single channel, clamped to [0,1]
  bool converged = false;
  int iterations = 0;
  // Relative residual ||A a - b|| / ||b|| of the unclamped solution.
  double residual = 0.0;
};

// A pixel is unknown when its (2*band+1)^2 neighbourhood holds both labels;
// band 0 leaves every pixel known.
Trimap trimap_from_mask(const BinaryMask& mask, int width, int height, int band);
Trimap trimap_from_map(const FigureGroundMap& map, const SegmentMap& seg, int band = 4);

using SparseMatrix = Eigen::SparseMatrix<double>;

// Closed-form matting Laplacian over all windows that fit in the image.
SparseMatrix matting_laplacian(const RasterImage& img, const MattingParams& params = {});

// The system L + w * Diag(known) and its right-hand side w * s.
struct MattingSystem {
  SparseMatrix A;
  Eigen::VectorXd b;
};
MattingSystem matting_system(const RasterImage& img, const Trimap& tri,
                             const MattingParams& params = {});

AlphaMatte solve_matte(const RasterImage& img, const Trimap& tri, const MattingParams& params = {});

// a^T L a + w * sum over known pixels of (a - s)^2.
double matte_energy(const SparseMatrix& L, const Trimap& tri, const Eigen::VectorXd& alpha,
                    double constraint_weight);

void save_matte_png(const AlphaMatte& matte, const std::filesystem::path& path);

}  // namespace ssr
