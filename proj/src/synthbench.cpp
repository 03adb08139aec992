#include "ssr/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "ssr/random.hpp"

namespace ssr {

SceneLayout half_split_layout(int width, int height) {
  SceneLayout layout;
  layout.width = width;
  layout.height = height;
  layout.foreground = {Rect{width / 2, 0, width - width / 2, height}};
  return layout;
}

SceneLayout random_rect_layout(int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  SceneLayout layout;
  layout.width = width;
  layout.height = height;
  const int w = width / 3 + static_cast<int>(rng.index(width / 3 + 1));
  const int h = height / 3 + static_cast<int>(rng.index(height / 3 + 1));
  const int x = static_cast<int>(rng.index(width - w + 1));
  const int y = static_cast<int>(rng.index(height - h + 1));
  layout.foreground = {Rect{x, y, w, h}};
  return layout;
}

namespace {

struct Combination {
  std::vector<int> atoms;
  std::vector<double> coefs;
};

std::vector<Combination> draw_combinations(int count, int atom_count, int per_tile,
                                           double scale, Rng& rng) {
  std::vector<Combination> out(count);
  const int k = std::min(per_tile, atom_count);
  std::vector<int> order(atom_count);
  for (auto& c : out) {
    for (int i = 0; i < atom_count; ++i) order[i] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(rng.index(atom_count - i));
      std::swap(order[i], order[j]);
      c.atoms.push_back(order[i]);
      const double mag = scale * rng.uniform(0.5, 1.0);
      c.coefs.push_back(rng.uniform() < 0.5 ? -mag : mag);
    }
  }
  return out;
}

}  // namespace

PlantedScene make_planted_scene(const std::vector<PatchAtom>& fg_atoms,
                                const std::vector<PatchAtom>& bg_atoms,
                                const SceneLayout& layout, double noise_sigma,
                                std::uint64_t seed) {
  if (fg_atoms.empty() || bg_atoms.empty()) {
    throw ArgumentError("make_planted_scene: both atom sets must be non-empty");
  }
  const Eigen::Index size = fg_atoms.front().rows();
  for (const auto* set : {&fg_atoms, &bg_atoms})
    for (const auto& a : *set)
      if (a.rows() != size || a.cols() != size || size < 1) {
        throw ArgumentError("make_planted_scene: atoms must be square and share one size");
      }
  if (layout.width < 1 || layout.height < 1) throw ArgumentError("make_planted_scene: empty canvas");
  if (noise_sigma < 0.0) throw ArgumentError("make_planted_scene: noise_sigma must be >= 0");
  for (std::size_t i = 0; i < layout.foreground.size(); ++i) {
    const Rect& r = layout.foreground[i];
    if (r.width < 1 || r.height < 1) throw ArgumentError("make_planted_scene: empty rectangle");
    for (std::size_t j = 0; j < i; ++j)
      if (r.overlaps(layout.foreground[j])) {
        throw ArgumentError("make_planted_scene: foreground rectangles overlap");
      }
  }
  const int tile = layout.tile > 0 ? layout.tile : static_cast<int>(size);
  const int ntx = (layout.width + tile - 1) / tile;
  const int nty = (layout.height + tile - 1) / tile;

  Rng rng(seed);
  const double scale = layout.amplitude * static_cast<double>(size);
  const auto fg = draw_combinations(layout.banded ? nty : ntx * nty,
                                    static_cast<int>(fg_atoms.size()), layout.atoms_per_tile,
                                    scale, rng);
  const auto bg = draw_combinations(layout.banded ? ntx : ntx * nty,
                                    static_cast<int>(bg_atoms.size()), layout.atoms_per_tile,
                                    scale, rng);

  PlantedScene scene{RasterImage(layout.width, layout.height, 1),
                     BinaryMask(static_cast<std::size_t>(layout.width) * layout.height, 0)};
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const bool is_fg = std::any_of(layout.foreground.begin(), layout.foreground.end(),
                                     [&](const Rect& r) { return r.contains(x, y); });
      const int tx = x / tile, ty = y / tile;
      const int ax = (x % tile) % static_cast<int>(size);
      const int ay = (y % tile) % static_cast<int>(size);
      const Combination& c = is_fg ? fg[layout.banded ? ty : ty * ntx + tx]
                                   : bg[layout.banded ? tx : ty * ntx + tx];
      const auto& atoms = is_fg ? fg_atoms : bg_atoms;
      double v = is_fg ? layout.fg_base : layout.bg_base;
      for (std::size_t i = 0; i < c.atoms.size(); ++i) v += c.coefs[i] * atoms[c.atoms[i]](ay, ax);
      if (noise_sigma > 0.0) v += noise_sigma * rng.normal();
      scene.image.at(x, y) = std::clamp(v, 0.0, 1.0);
      scene.mask[static_cast<std::size_t>(y) * layout.width + x] = is_fg ? 1 : 0;
    }
  }
  return scene;
}

std::vector<PatchAtom> make_stripe_atoms(int count, int size, bool horizontal,
                                         double min_period, double max_period,
                                         std::uint64_t seed) {
  if (count < 1 || size < 2) throw ArgumentError("make_stripe_atoms: invalid count or size");
  if (!(min_period > 0.0) || max_period < min_period) {
    throw ArgumentError("make_stripe_atoms: invalid period range");
  }
  Rng rng(seed);
  std::vector<PatchAtom> atoms;
  atoms.reserve(count);
  while (static_cast<int>(atoms.size()) < count) {
    Eigen::VectorXd profile = Eigen::VectorXd::Zero(size);
    for (int m = 0; m < 2; ++m) {
      const double period = rng.uniform(min_period, max_period);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double weight = rng.uniform(0.3, 1.0);
      for (int t = 0; t < size; ++t) {
        profile(t) += weight * std::sin(2.0 * std::numbers::pi * t / period + phase);
      }
    }
    profile.array() -= profile.mean();
    PatchAtom a(size, size);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) a(r, c) = horizontal ? profile(r) : profile(c);
    const double norm = a.norm();
    if (norm < 1e-6) continue;
    atoms.push_back(a / norm);
  }
  return atoms;
}

RasterImage replicate_upsample(const RasterImage& img, int factor) {
  if (factor < 1) throw ArgumentError("replicate_upsample: factor must be >= 1");
  RasterImage out(img.width() * factor, img.height() * factor, img.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(x / factor, y / factor, c);
  return out;
}

BinaryMask replicate_mask(const BinaryMask& mask, int width, int height, int factor) {
  if (mask.size() != static_cast<std::size_t>(width) * height) {
    throw ArgumentError("replicate_mask: mask size does not match dimensions");
  }
  BinaryMask out(mask.size() * factor * factor);
  const int W = width * factor;
  for (int y = 0; y < height * factor; ++y)
    for (int x = 0; x < W; ++x)
      out[static_cast<std::size_t>(y) * W + x] = mask[static_cast<std::size_t>(y / factor) * width + x / factor];
  return out;
}

PlantedDictionaries train_planted_dictionaries(const std::vector<PatchAtom>& fg_atoms,
                                               const std::vector<PatchAtom>& bg_atoms,
                                               const std::string& class_name,
                                               const PlantedTrainingConfig& cfg,
                                               std::uint64_t seed) {
  if (cfg.scenes < 1 || cfg.samples_per_role < cfg.scenes) {
    throw ArgumentError("train_planted_dictionaries: need at least one sample per scene");
  }
  const int f = cfg.training.magnification;
  std::vector<TrainingSample> fg, bg;
  Rng rng(seed);
  for (int s = 0; s < cfg.scenes; ++s) {
    const int n = cfg.samples_per_role / cfg.scenes + (s < cfg.samples_per_role % cfg.scenes);
    const SceneLayout layout = random_rect_layout(cfg.scene_size, cfg.scene_size, rng.next());
    const PlantedScene scene = make_planted_scene(fg_atoms, bg_atoms, layout, cfg.noise_sigma, rng.next());
    const RasterImage hi = replicate_upsample(scene.image, f);
    const BinaryMask mask = replicate_mask(scene.mask, scene.image.width(), scene.image.height(), f);
    for (Role role : {Role::kForeground, Role::kBackground}) {
      auto batch = sample_training_patches(hi, mask, f, n, cfg.training.patch_size, role, rng.next());
      auto& dst = role == Role::kForeground ? fg : bg;
      dst.insert(dst.end(), std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
    }
  }
  PlantedDictionaries out;
  TrainingConfig tc = cfg.training;
  tc.rng_seed = rng.next();
  out.fg = train_coupled_dictionary(fg, tc, class_name, Role::kForeground);
  tc.rng_seed = rng.next();
  out.bg = train_coupled_dictionary(bg, tc, class_name, Role::kBackground);
  return out;
}

double mask_accuracy(const BinaryMask& predicted, const BinaryMask& truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw ArgumentError("mask_accuracy: masks must be non-empty and equally sized");
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) same += (predicted[i] != 0) == (truth[i] != 0);
  return static_cast<double>(same) / static_cast<double>(truth.size());
}

Eigen::VectorXd oracle_l12_projection(const Eigen::VectorXd& x, const GroupIndex& groups,
                                      double tau, int steps) {
  if (tau < 0.0) throw ArgumentError("oracle_l12_projection: tau must be >= 0");
  std::vector<double> norms(groups.group_count());
  double total = 0.0, hi = 0.0;
  for (int g = 0; g < groups.group_count(); ++g) {
    Eigen::VectorXd sub(groups.group(g).size());
    for (std::size_t i = 0; i < groups.group(g).size(); ++i) sub(i) = x(groups.group(g)[i]);
    norms[g] = sub.norm();
    total += norms[g];
    hi = std::max(hi, norms[g]);
  }
  if (total <= tau) return x;
  double lo = 0.0;
  for (int s = 0; s < steps; ++s) {
    const double mid = 0.5 * (lo + hi);
    double mass = 0.0;
    for (double n : norms) mass += std::max(0.0, n - mid);
    (mass > tau ? lo : hi) = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (int g = 0; g < groups.group_count(); ++g) {
    if (norms[g] <= lambda) continue;
    for (int i : groups.group(g)) out(i) = x(i) * (norms[g] - lambda) / norms[g];
  }
  return out;
}

namespace {

double largest_gram_eigenvalue(const DictionaryMatrix& d) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d.transpose() * d, Eigen::EigenvaluesOnly);
  return std::max(eig.eigenvalues().maxCoeff(), 1e-300);
}

}  // namespace

Eigen::VectorXd oracle_lasso(const Eigen::VectorXd& y, const DictionaryMatrix& d,
                             double lambda, int max_iter) {
  const Eigen::Index n = d.cols();
  const double step = 1.0 / (2.0 * largest_gram_eigenvalue(d));
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd u_prev = u, v_prev = v;
  auto objective = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return 0.5 * (y - d * (a - b)).squaredNorm() + lambda * (a.sum() + b.sum());
  };
  double f = objective(u, v);
  double t = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    const Eigen::VectorXd su = u + beta * (u - u_prev);
    const Eigen::VectorXd sv = v + beta * (v - v_prev);
    const Eigen::VectorXd corr = d.transpose() * (y - d * (su - sv));
    const Eigen::VectorXd nu = (su - step * (lambda * Eigen::VectorXd::Ones(n) - corr)).cwiseMax(0.0);
    const Eigen::VectorXd nv = (sv - step * (lambda * Eigen::VectorXd::Ones(n) + corr)).cwiseMax(0.0);
    const double f_next = objective(nu, nv);
    if (f_next > f) {
      // Restart the momentum; a failed plain step means rounding-level convergence.
      if (t == 1.0) break;
      t = 1.0;
      u_prev = u;
      v_prev = v;
      continue;
    }
    const double moved = (nu - u).squaredNorm() + (nv - v).squaredNorm();
    u_prev = u;
    v_prev = v;
    u = nu;
    v = nv;
    t = t_next;
    if (moved < 1e-32) break;
  }
  return u - v;
}

namespace {

Eigen::MatrixXd group_lasso_fista(const Eigen::MatrixXd& Y, const DictionaryMatrix& d,
                                  const GroupIndex& groups, double mu, Eigen::MatrixXd w,
                                  double step, int max_iter, double tol) {
  auto objective = [&](const Eigen::MatrixXd& m) {
    return (Y - d * m).squaredNorm() + mu * l12_norm(m, groups);
  };
  auto prox = [&](Eigen::MatrixXd& m, double t) {
    for (int g = 0; g < groups.group_count(); ++g) {
      double s = 0.0;
      for (int i : groups.group(g)) s += m.row(i).squaredNorm();
      const double norm = std::sqrt(s);
      const double scale = norm > t ? (norm - t) / norm : 0.0;
      for (int i : groups.group(g)) m.row(i) *= scale;
    }
  };
  Eigen::MatrixXd prev = w;
  double f = objective(w);
  double t = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const Eigen::MatrixXd s = w + ((t - 1.0) / t_next) * (w - prev);
    Eigen::MatrixXd next = s - step * 2.0 * (d.transpose() * (d * s - Y));
    prox(next, step * mu);
    const double f_next = objective(next);
    if (f_next > f) {
      if (t == 1.0) break;
      t = 1.0;
      prev = w;
      continue;
    }
    const double moved = (next - w).squaredNorm();
    prev = w;
    w = std::move(next);
    t = t_next;
    if (moved <= tol * tol * std::max(1.0, w.squaredNorm())) break;
    const bool stalled = f - f_next <= 1e-16 * f;
    f = f_next;
    if (stalled && it > 100) break;
  }
  return w;
}

}  // namespace

Eigen::MatrixXd oracle_group_lasso_penalized(const Eigen::MatrixXd& Y, const DictionaryMatrix& d,
                                             const GroupIndex& groups, double mu, int max_iter,
                                             double tol) {
  const double step = 1.0 / (2.0 * largest_gram_eigenvalue(d));
  return group_lasso_fista(Y, d, groups, mu, Eigen::MatrixXd::Zero(d.cols(), Y.cols()), step,
                           max_iter, tol);
}

Eigen::MatrixXd oracle_gmtl(const Eigen::MatrixXd& Y, const DictionaryMatrix& d,
                            const GroupIndex& groups, double C) {
  if (C < 0.0) throw ArgumentError("oracle_gmtl: C must be >= 0");
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(d.cols(), Y.cols());
  if (C == 0.0) return zero;
  const double step = 1.0 / (2.0 * largest_gram_eigenvalue(d));
  const int iters = 200000;
  const double tol = 1e-13;
  // Above mu_max every group is zero at the optimum.
  const Eigen::MatrixXd grad0 = 2.0 * d.transpose() * Y;
  double mu_hi = 0.0;
  for (int g = 0; g < groups.group_count(); ++g) {
    double s = 0.0;
    for (int i : groups.group(g)) s += grad0.row(i).squaredNorm();
    mu_hi = std::max(mu_hi, std::sqrt(s));
  }
  if (mu_hi == 0.0) return zero;
  double mu_lo = 1e-12 * mu_hi;
  Eigen::MatrixXd w_lo = group_lasso_fista(Y, d, groups, mu_lo, zero, step, iters, tol);
  if (l12_norm(w_lo, groups) <= C) return w_lo;
  Eigen::MatrixXd w = w_lo;
  for (int s = 0; s < 80; ++s) {
    const double mu = std::sqrt(mu_lo * mu_hi);
    w = group_lasso_fista(Y, d, groups, mu, w, step, iters, tol);
    const double norm = l12_norm(w, groups);
    if (std::abs(norm - C) <= 1e-11 * C) break;
    (norm > C ? mu_lo : mu_hi) = mu;
    if (mu_hi / mu_lo < 1.0 + 1e-13) break;
  }
  return w;
}

}  // namespace ssr
