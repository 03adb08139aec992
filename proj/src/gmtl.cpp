#include "ssr/gmtl.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "ssr/random.hpp"

namespace ssr {

GroupIndex::GroupIndex(std::vector<std::vector<int>> groups, std::vector<GroupTag> tags)
    : groups_(std::move(groups)), tags_(std::move(tags)) {
  if (groups_.size() != tags_.size()) {
    throw ArgumentError("GroupIndex: one tag per group required");
  }
  for (const auto& g : groups_) total_ += static_cast<int>(g.size());
  std::vector<char> seen(total_, 0);
  for (const auto& g : groups_) {
    for (int i : g) {
      if (i < 0 || i >= total_ || seen[i]) {
        throw ArgumentError("GroupIndex: groups must be disjoint and cover 0..n-1");
      }
      seen[i] = 1;
    }
  }
}

void GroupIndex::append(int size, GroupTag tag) {
  if (size < 1) throw ArgumentError("GroupIndex: empty group");
  std::vector<int> g(size);
  std::iota(g.begin(), g.end(), total_);
  total_ += size;
  groups_.push_back(std::move(g));
  tags_.push_back(std::move(tag));
}

double l12_norm(const Eigen::VectorXd& x, const GroupIndex& groups) {
  double total = 0.0;
  for (int g = 0; g < groups.group_count(); ++g) {
    double s = 0.0;
    for (int i : groups.group(g)) s += x(i) * x(i);
    total += std::sqrt(s);
  }
  return total;
}

double l12_norm(const Eigen::MatrixXd& omega, const GroupIndex& groups) {
  double total = 0.0;
  for (int g = 0; g < groups.group_count(); ++g) {
    double s = 0.0;
    for (int i : groups.group(g)) s += omega.row(i).squaredNorm();
    total += std::sqrt(s);
  }
  return total;
}

double l12_threshold(std::vector<double> norms, double tau) {
  if (tau < 0.0) throw ArgumentError("project_l12_ball: tau must be >= 0");
  const double total = std::accumulate(norms.begin(), norms.end(), 0.0);
  if (total <= tau) return 0.0;
  if (tau == 0.0) return *std::max_element(norms.begin(), norms.end());
  std::sort(norms.begin(), norms.end(), std::greater<>());
  double prefix = 0.0;
  double lambda = 0.0;
  for (std::size_t r = 0; r < norms.size(); ++r) {
    prefix += norms[r];
    const double candidate = (prefix - tau) / static_cast<double>(r + 1);
    if (norms[r] > candidate) lambda = candidate;
    else break;
  }
  return lambda;
}

namespace {

void check_groups_match(Eigen::Index n, const GroupIndex& groups) {
  if (n != groups.total_size()) {
    throw ArgumentError("project_l12_ball: vector length " + std::to_string(n) +
                        " does not match group index size " +
                        std::to_string(groups.total_size()));
  }
}

}  // namespace

Eigen::VectorXd project_l12_ball(const Eigen::VectorXd& x, const GroupIndex& groups,
                                 double tau) {
  check_groups_match(x.size(), groups);
  std::vector<double> norms(groups.group_count());
  for (int g = 0; g < groups.group_count(); ++g) {
    double s = 0.0;
    for (int i : groups.group(g)) s += x(i) * x(i);
    norms[g] = std::sqrt(s);
  }
  const double total = std::accumulate(norms.begin(), norms.end(), 0.0);
  if (tau < 0.0) throw ArgumentError("project_l12_ball: tau must be >= 0");
  if (total <= tau) return x;
  const double lambda = l12_threshold(norms, tau);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (int g = 0; g < groups.group_count(); ++g) {
    if (norms[g] <= lambda) continue;
    const double scale = (norms[g] - lambda) / norms[g];
    for (int i : groups.group(g)) out(i) = x(i) * scale;
  }
  return out;
}

void project_l12_ball(Eigen::MatrixXd& omega, const GroupIndex& groups, double tau) {
  check_groups_match(omega.rows(), groups);
  std::vector<double> norms(groups.group_count());
  for (int g = 0; g < groups.group_count(); ++g) {
    double s = 0.0;
    for (int i : groups.group(g)) s += omega.row(i).squaredNorm();
    norms[g] = std::sqrt(s);
  }
  const double total = std::accumulate(norms.begin(), norms.end(), 0.0);
  if (tau < 0.0) throw ArgumentError("project_l12_ball: tau must be >= 0");
  if (total <= tau) return;
  const double lambda = l12_threshold(norms, tau);
  for (int g = 0; g < groups.group_count(); ++g) {
    const double scale = norms[g] > lambda ? (norms[g] - lambda) / norms[g] : 0.0;
    for (int i : groups.group(g)) omega.row(i) *= scale;
  }
}

double default_ball_radius(int tasks, const GroupIndex& groups) {
  return 0.1 * tasks * std::sqrt(groups.mean_group_size());
}

double spectral_norm_gram(const DictionaryMatrix& d, int iterations) {
  if (d.size() == 0) return 0.0;
  Rng rng(0x5eed);
  Eigen::VectorXd v(d.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 1.0 + 0.1 * rng.uniform();
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd w = d.transpose() * (d * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    estimate = v.dot(w);
    v = w / norm;
  }
  return estimate;
}

double gmtl_objective(const Eigen::MatrixXd& Y, const DictionaryMatrix& d,
                      const Eigen::MatrixXd& omega) {
  return (Y - d * omega).squaredNorm();
}

GmtlSolver::GmtlSolver(DictionaryMatrix dictionary, GroupIndex groups)
    : dict_(std::move(dictionary)), groups_(std::move(groups)) {
  if (dict_.cols() != groups_.total_size()) {
    throw ArgumentError("gmtl: dictionary has " + std::to_string(dict_.cols()) +
                        " atoms but group index covers " + std::to_string(groups_.total_size()));
  }
  if (!dict_.allFinite()) throw NumericError("gmtl: non-finite dictionary");
  sigma_max_ = spectral_norm_gram(dict_);
}

CoefficientMatrix GmtlSolver::solve(const TaskBatch& batch, const GmtlConfig& cfg) const {
  const Eigen::MatrixXd& Y = batch.Y;
  if (Y.rows() != dict_.rows()) {
    throw ArgumentError("gmtl: feature dimension " + std::to_string(Y.rows()) +
                        " does not match dictionary dimension " + std::to_string(dict_.rows()));
  }
  if (Y.cols() < 1) throw ArgumentError("gmtl: task batch is empty");
  if (!Y.allFinite()) throw NumericError("gmtl: non-finite task data");
  if (cfg.eta && !(*cfg.eta > 0.0)) throw ArgumentError("gmtl: eta must be > 0");
  if (cfg.C && !(*cfg.C >= 0.0)) throw ArgumentError("gmtl: C must be >= 0");
  if (cfg.relative_C && !(*cfg.relative_C >= 0.0)) {
    throw ArgumentError("gmtl: relative_C must be >= 0");
  }
  if (cfg.max_iter < 1) throw ArgumentError("gmtl: max_iter must be >= 1");
  if (!(cfg.tol > 0.0)) throw ArgumentError("gmtl: tol must be > 0");

  const double radius = cfg.C           ? *cfg.C
                        : cfg.relative_C ? *cfg.relative_C * Y.norm()
                                         : default_ball_radius(batch.tasks(), groups_);
  const double eta = cfg.eta ? *cfg.eta : (sigma_max_ > 0.0 ? 0.9 / sigma_max_ : 1.0);

  CoefficientMatrix result;
  result.omega = Eigen::MatrixXd::Zero(dict_.cols(), Y.cols());
  Eigen::MatrixXd residual = -Y;  // D * Omega - Y
  double f = residual.squaredNorm();
  result.objective_history.push_back(f);

  for (int it = 1; it <= cfg.max_iter; ++it) {
    result.omega.noalias() -= eta * (dict_.transpose() * residual);
    project_l12_ball(result.omega, groups_, radius);
    residual.noalias() = dict_ * result.omega;
    residual -= Y;
    const double next = residual.squaredNorm();
    result.objective_history.push_back(next);
    result.iterations = it;
    const double denom = std::max(std::abs(f), std::numeric_limits<double>::min());
    const double change = std::abs(f - next) / denom;
    f = next;
    if (change < cfg.tol || next == 0.0) {
      result.converged = true;
      break;
    }
  }
  result.objective = f;
  return result;
}

CoefficientMatrix gmtl_solve(const TaskBatch& batch, const DictionaryMatrix& d,
                             const GroupIndex& groups, const GmtlConfig& cfg) {
  return GmtlSolver(d, groups).solve(batch, cfg);
}

SegmentScore classify_segment(const Eigen::MatrixXd& omega, const GroupIndex& groups,
                              const std::string& class_name) {
  if (omega.rows() != groups.total_size()) {
    throw ArgumentError("classify_segment: coefficient rows do not match group index");
  }
  bool has_fg = false, has_bg = false;
  SegmentScore s;
  for (int g = 0; g < groups.group_count(); ++g) {
    if (groups.tag(g).class_name != class_name) continue;
    double sum = 0.0;
    for (int i : groups.group(g)) sum += omega.row(i).cwiseAbs().sum();
    if (groups.tag(g).role == Role::kForeground) {
      s.fg_score += sum;
      has_fg = true;
    } else {
      s.bg_score += sum;
      has_bg = true;
    }
  }
  if (!has_fg || !has_bg) {
    throw ArgumentError("classify_segment: class '" + class_name +
                        "' needs both fg and bg groups in the index");
  }
  const double k = static_cast<double>(std::max<Eigen::Index>(1, omega.cols()));
  s.fg_score /= k;
  s.bg_score /= k;
  s.foreground = s.fg_score > s.bg_score;
  return s;
}

}  // namespace ssr
