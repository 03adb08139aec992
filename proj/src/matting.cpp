#include "ssr/matting.hpp"

#include <algorithm>

#include <Eigen/IterativeLinearSolvers>

namespace ssr {

std::size_t Trimap::unknown_count() const {
  return static_cast<std::size_t>(std::count(state.begin(), state.end(), TrimapState::kUnknown));
}

bool Trimap::has(TrimapState s) const {
  return std::find(state.begin(), state.end(), s) != state.end();
}

Trimap trimap_from_mask(const BinaryMask& mask, int width, int height, int band) {
  if (band < 0) throw ArgumentError("trimap band must be >= 0");
  if (width < 0 || height < 0 || mask.size() != static_cast<std::size_t>(width) * height) {
    throw ArgumentError("trimap: mask size does not match " + std::to_string(width) + "x" +
                        std::to_string(height));
  }
  const std::size_t n = mask.size();
  // Separable max/min filters over the square neighbourhood.
  auto filter = [&](const std::vector<std::uint8_t>& in, bool horizontal, bool take_max) {
    std::vector<std::uint8_t> out(n);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        std::uint8_t v = take_max ? 0 : 1;
        for (int d = -band; d <= band; ++d) {
          const int xx = horizontal ? x + d : x;
          const int yy = horizontal ? y : y + d;
          if (xx < 0 || yy < 0 || xx >= width || yy >= height) continue;
          const std::uint8_t m = in[static_cast<std::size_t>(yy) * width + xx];
          v = take_max ? std::max(v, m) : std::min(v, m);
        }
        out[static_cast<std::size_t>(y) * width + x] = v;
      }
    }
    return out;
  };
  std::vector<std::uint8_t> binary(n);
  for (std::size_t i = 0; i < n; ++i) binary[i] = mask[i] != 0;
  const auto hi = filter(filter(binary, true, true), false, true);
  const auto lo = filter(filter(binary, true, false), false, false);

  Trimap tri;
  tri.width = width;
  tri.height = height;
  tri.state.resize(n);
  tri.value.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (hi[i] != lo[i]) {
      tri.state[i] = TrimapState::kUnknown;
    } else {
      tri.state[i] = binary[i] ? TrimapState::kForeground : TrimapState::kBackground;
      tri.value[i] = binary[i];
    }
  }
  return tri;
}

Trimap trimap_from_map(const FigureGroundMap& map, const SegmentMap& seg, int band) {
  return trimap_from_mask(map.pixel_mask(seg), seg.width(), seg.height(), band);
}

SparseMatrix matting_laplacian(const RasterImage& img, const MattingParams& params) {
  const int r = params.window_radius;
  if (r < 1) throw ArgumentError("matting window radius must be >= 1");
  if (!(params.epsilon > 0.0)) throw ArgumentError("matting epsilon must be > 0");
  const int W = img.width(), H = img.height(), C = img.channels();
  const int side = 2 * r + 1;
  if (W < side || H < side) {
    throw ArgumentError("image " + std::to_string(W) + "x" + std::to_string(H) +
                        " is smaller than the " + std::to_string(side) + "x" +
                        std::to_string(side) + " matting window");
  }
  const int m = side * side;
  // Pixel pairs in a common window are at most 2r apart in each axis, so
  // entries live in a (4r+1)^2 stencil around each pixel.
  const int span = 4 * r + 1;
  const std::size_t n = img.pixel_count();
  std::vector<double> stencil(n * span * span, 0.0);
  auto slot = [&](int i_pix, int dx, int dy) -> double& {
    return stencil[static_cast<std::size_t>(i_pix) * span * span + (dy + 2 * r) * span + (dx + 2 * r)];
  };

  Eigen::MatrixXd colors(C, m);
  for (int cy = r; cy < H - r; ++cy) {
    for (int cx = r; cx < W - r; ++cx) {
      for (int k = 0; k < m; ++k) {
        const int x = cx - r + k % side, y = cy - r + k / side;
        for (int c = 0; c < C; ++c) colors(c, k) = img.at(x, y, c);
      }
      const Eigen::VectorXd mu = colors.rowwise().mean();
      const Eigen::MatrixXd centered = colors.colwise() - mu;
      Eigen::MatrixXd cov = centered * centered.transpose() / m;
      cov.diagonal().array() += params.epsilon / m;
      const Eigen::MatrixXd G = centered.transpose() * cov.ldlt().solve(centered);
      for (int a = 0; a < m; ++a) {
        const int xa = cx - r + a % side, ya = cy - r + a / side;
        for (int b = 0; b < m; ++b) {
          const int xb = cx - r + b % side, yb = cy - r + b / side;
          slot(ya * W + xa, xb - xa, yb - ya) += (a == b ? 1.0 : 0.0) - (1.0 + G(a, b)) / m;
        }
      }
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n * span * span / 2);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int dy = -2 * r; dy <= 2 * r; ++dy) {
        for (int dx = -2 * r; dx <= 2 * r; ++dx) {
          const double v = slot(y * W + x, dx, dy);
          if (v != 0.0) triplets.emplace_back(y * W + x, (y + dy) * W + (x + dx), v);
        }
      }
    }
  }
  SparseMatrix L(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  L.setFromTriplets(triplets.begin(), triplets.end());
  return L;
}

namespace {

void check_trimap(const RasterImage& img, const Trimap& tri) {
  if (tri.width != img.width() || tri.height != img.height() ||
      tri.state.size() != img.pixel_count() || tri.value.size() != img.pixel_count()) {
    throw ArgumentError("trimap does not match the image size");
  }
}

}  // namespace

MattingSystem matting_system(const RasterImage& img, const Trimap& tri,
                             const MattingParams& params) {
  check_trimap(img, tri);
  if (!(params.constraint_weight > 0.0)) throw ArgumentError("constraint weight must be > 0");
  MattingSystem sys;
  sys.A = matting_laplacian(img, params);
  const Eigen::Index n = sys.A.rows();
  sys.b = Eigen::VectorXd::Zero(n);
  SparseMatrix D(n, n);
  std::vector<Eigen::Triplet<double>> diag;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (tri.state[i] == TrimapState::kUnknown) continue;
    diag.emplace_back(i, i, params.constraint_weight);
    sys.b(i) = params.constraint_weight * tri.value[i];
  }
  D.setFromTriplets(diag.begin(), diag.end());
  sys.A += D;
  return sys;
}

AlphaMatte solve_matte(const RasterImage& img, const Trimap& tri, const MattingParams& params) {
  check_trimap(img, tri);
  if (!tri.has(TrimapState::kForeground) || !tri.has(TrimapState::kBackground)) {
    throw ConstraintError("matting needs at least one known foreground and one known background pixel");
  }
  if (!(params.tol > 0.0) || params.max_iter < 1) {
    throw ArgumentError("matting solver needs tol > 0 and max_iter >= 1");
  }
  const MattingSystem sys = matting_system(img, tri, params);

  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(params.tol);
  cg.setMaxIterations(params.max_iter);
  cg.compute(sys.A);
  Eigen::VectorXd guess(sys.b.size());
  for (Eigen::Index i = 0; i < guess.size(); ++i) {
    guess(i) = tri.state[i] == TrimapState::kUnknown ? 0.5 : tri.value[i];
  }
  const Eigen::VectorXd x = cg.solveWithGuess(sys.b, guess);

  AlphaMatte out;
  out.iterations = static_cast<int>(cg.iterations());
  out.residual = (sys.A * x - sys.b).norm() / std::max(sys.b.norm(), 1e-300);
  out.converged = cg.info() == Eigen::Success;
  out.alpha = RasterImage(img.width(), img.height(), 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) out.alpha.data()[i] = std::clamp(x(i), 0.0, 1.0);
  return out;
}

double matte_energy(const SparseMatrix& L, const Trimap& tri, const Eigen::VectorXd& alpha,
                    double constraint_weight) {
  double e = alpha.dot(L * alpha);
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (tri.state[i] == TrimapState::kUnknown) continue;
    const double d = alpha(i) - tri.value[i];
    e += constraint_weight * d * d;
  }
  return e;
}

void save_matte_png(const AlphaMatte& matte, const std::filesystem::path& path) {
  save_png(matte.alpha, path);
}

}  // namespace ssr
