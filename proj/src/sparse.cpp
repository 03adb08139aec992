#include "ssr/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ssr {

bool has_unit_columns(const DictionaryMatrix& d, double tol) {
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    if (std::abs(d.col(j).norm() - 1.0) > tol) return false;
  }
  return true;
}

void normalize_columns(DictionaryMatrix& d) {
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    const double n = d.col(j).norm();
    if (n > 0.0) d.col(j) /= n;
  }
}

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

double lasso_objective(const Eigen::VectorXd& y, const DictionaryMatrix& d,
                       const Eigen::VectorXd& alpha, double lambda) {
  return 0.5 * (y - d * alpha).squaredNorm() + lambda * alpha.lpNorm<1>();
}

namespace {

double kkt_from_correlation(const Eigen::VectorXd& corr, const Eigen::VectorXd& alpha,
                            double lambda) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < alpha.size(); ++j) {
    const double v = alpha(j) == 0.0 ? std::abs(corr(j)) - lambda
                                     : std::abs(corr(j) - lambda * (alpha(j) > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("lasso: non-finite ") + what);
}

}  // namespace

double kkt_violation(const Eigen::VectorXd& y, const DictionaryMatrix& d,
                     const Eigen::VectorXd& alpha, double lambda) {
  return kkt_from_correlation(d.transpose() * (y - d * alpha), alpha, lambda);
}

LassoSolver::LassoSolver(DictionaryMatrix dictionary) : dict_(std::move(dictionary)) {
  require_finite(dict_, "dictionary");
  col_sq_norms_ = dict_.colwise().squaredNorm().transpose();
  if (dict_.cols() <= kGramLimit) gram_ = dict_.transpose() * dict_;
}

SparseCode LassoSolver::solve(const Eigen::VectorXd& y, const LassoOptions& opts,
                              const Eigen::VectorXd* warm_start) const {
  if (y.size() != dict_.rows()) {
    throw ArgumentError("lasso: signal length " + std::to_string(y.size()) +
                        " does not match dictionary dimension " + std::to_string(dict_.rows()));
  }
  if (!(opts.lambda > 0.0) || !std::isfinite(opts.lambda)) {
    throw ArgumentError("lasso: lambda must be positive and finite");
  }
  if (!(opts.tol > 0.0)) throw ArgumentError("lasso: tol must be positive");
  if (opts.max_iter < 1) throw ArgumentError("lasso: max_iter must be >= 1");
  require_finite(y, "signal");

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(dict_.cols());
  if (warm_start != nullptr) {
    if (warm_start->size() != dict_.cols()) {
      throw ArgumentError("lasso: warm start has wrong length");
    }
    require_finite(*warm_start, "warm start");
    alpha = *warm_start;
  }
  SparseCode code = uses_gram() ? solve_gram(y, opts, std::move(alpha))
                                : solve_residual(y, opts, std::move(alpha));
  code.objective_value = lasso_objective(y, dict_, code.coefficients, opts.lambda);
  return code;
}

SparseCode LassoSolver::solve_gram(const Eigen::VectorXd& y, const LassoOptions& opts,
                                   Eigen::VectorXd alpha) const {
  const Eigen::Index n = dict_.cols();
  const double lambda = opts.lambda;
  const Eigen::VectorXd dty = dict_.transpose() * y;
  // corr = D^T (y - D alpha), kept current by rank-one Gram updates.
  Eigen::VectorXd corr = dty - gram_ * alpha;

  auto update = [&](Eigen::Index j) {
    const double gjj = col_sq_norms_(j);
    if (gjj == 0.0) return 0.0;
    const double next = soft_threshold(corr(j) + gjj * alpha(j), lambda) / gjj;
    const double delta = next - alpha(j);
    if (delta != 0.0) {
      corr.noalias() -= gram_.col(j) * delta;
      alpha(j) = next;
    }
    return std::abs(delta);
  };

  SparseCode code;
  std::vector<Eigen::Index> active;
  int iter = 0;
  while (iter < opts.max_iter) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) max_delta = std::max(max_delta, update(j));
    ++iter;
    if (max_delta < opts.tol) {
      corr = dty - gram_ * alpha;
      if (kkt_from_correlation(corr, alpha, lambda) <= 10.0 * opts.tol) {
        code.converged = true;
        break;
      }
      continue;
    }
    // Sweep the support until it settles, then return to a full sweep.
    active.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (alpha(j) != 0.0) active.push_back(j);
    while (iter < opts.max_iter) {
      double inner = 0.0;
      for (Eigen::Index j : active) inner = std::max(inner, update(j));
      ++iter;
      if (inner < opts.tol) break;
    }
  }
  code.coefficients = std::move(alpha);
  code.iterations_used = iter;
  return code;
}

SparseCode LassoSolver::solve_residual(const Eigen::VectorXd& y, const LassoOptions& opts,
                                       Eigen::VectorXd alpha) const {
  const Eigen::Index n = dict_.cols();
  const double lambda = opts.lambda;
  Eigen::VectorXd residual = y - dict_ * alpha;

  auto update = [&](Eigen::Index j) {
    const double gjj = col_sq_norms_(j);
    if (gjj == 0.0) return 0.0;
    const double z = dict_.col(j).dot(residual) + gjj * alpha(j);
    const double next = soft_threshold(z, lambda) / gjj;
    const double delta = next - alpha(j);
    if (delta != 0.0) {
      residual.noalias() -= dict_.col(j) * delta;
      alpha(j) = next;
    }
    return std::abs(delta);
  };

  SparseCode code;
  std::vector<Eigen::Index> active;
  int iter = 0;
  while (iter < opts.max_iter) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) max_delta = std::max(max_delta, update(j));
    ++iter;
    if (max_delta < opts.tol) {
      residual = y - dict_ * alpha;
      const Eigen::VectorXd corr = dict_.transpose() * residual;
      if (kkt_from_correlation(corr, alpha, lambda) <= 10.0 * opts.tol) {
        code.converged = true;
        break;
      }
      continue;
    }
    active.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (alpha(j) != 0.0) active.push_back(j);
    while (iter < opts.max_iter) {
      double inner = 0.0;
      for (Eigen::Index j : active) inner = std::max(inner, update(j));
      ++iter;
      if (inner < opts.tol) break;
    }
  }
  code.coefficients = std::move(alpha);
  code.iterations_used = iter;
  return code;
}

SparseCode lasso(const Eigen::VectorXd& y, const DictionaryMatrix& d, double lambda,
                 double tol, int max_iter, const Eigen::VectorXd* warm_start) {
  return LassoSolver(d).solve(y, {lambda, tol, max_iter}, warm_start);
}

}  // namespace ssr
