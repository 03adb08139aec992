#pragma once

#include <optional>

#include <Eigen/Dense>

#include "ssr/error.hpp"

namespace ssr {

// p x n, one atom per column. Library dictionaries keep unit-norm columns.
using DictionaryMatrix = Eigen::MatrixXd;

bool has_unit_columns(const DictionaryMatrix& d, double tol = 1e-8);
// Scales every column to unit l2 norm; zero columns are left untouched.
void normalize_columns(DictionaryMatrix& d);

struct SparseCode {
  Eigen::VectorXd coefficients;
  double objective_value = 0.0;
  int iterations_used = 0;
  bool converged = false;
};

struct LassoOptions {
  double lambda = 0.1;
  double tol = 1e-6;
  int max_iter = 1000;
};

double soft_threshold(double x, double t);

// 0.5 * ||y - D a||^2 + lambda * ||a||_1
double lasso_objective(const Eigen::VectorXd& y, const DictionaryMatrix& d,
                       const Eigen::VectorXd& alpha, double lambda);

// Largest violation of the Lasso subgradient optimality conditions.
double kkt_violation(const Eigen::VectorXd& y, const DictionaryMatrix& d,
                     const Eigen::VectorXd& alpha, double lambda);

// Cyclic coordinate descent for min 0.5||y - D a||^2 + lambda ||a||_1.
// Caches D^T D when the dictionary has at most kGramLimit atoms; larger
// dictionaries update the residual directly. Reusable across many signals
// and safe to share between threads.
class LassoSolver {
 public:
  static constexpr int kGramLimit = 4096;

  explicit LassoSolver(DictionaryMatrix dictionary);

  const DictionaryMatrix& dictionary() const { return dict_; }
  int atoms() const { return static_cast<int>(dict_.cols()); }
  int dim() const { return static_cast<int>(dict_.rows()); }
  bool uses_gram() const { return gram_.size() > 0; }

  SparseCode solve(const Eigen::VectorXd& y, const LassoOptions& opts,
                   const Eigen::VectorXd* warm_start = nullptr) const;

 private:
  SparseCode solve_gram(const Eigen::VectorXd& y, const LassoOptions& opts,
                        Eigen::VectorXd alpha) const;
  SparseCode solve_residual(const Eigen::VectorXd& y, const LassoOptions& opts,
                            Eigen::VectorXd alpha) const;

  DictionaryMatrix dict_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd col_sq_norms_;
};

SparseCode lasso(const Eigen::VectorXd& y, const DictionaryMatrix& d, double lambda,
                 double tol = 1e-6, int max_iter = 1000,
                 const Eigen::VectorXd* warm_start = nullptr);

}  // namespace ssr
