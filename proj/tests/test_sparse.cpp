#include <cmath>
#include <limits>

#include "doctest.h"
#include "ssr/random.hpp"
#include "ssr/sparse.hpp"
#include "ssr/synthbench.hpp"

using namespace ssr;

namespace {

DictionaryMatrix random_dictionary(int p, int n, Rng& rng) {
  DictionaryMatrix d(p, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < p; ++i) d(i, j) = rng.normal();
  normalize_columns(d);
  return d;
}

Eigen::VectorXd random_vector(int p, Rng& rng) {
  Eigen::VectorXd v(p);
  for (int i = 0; i < p; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(0.5, 0.2) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(soft_threshold(-0.1, 0.2) == 0.0);
  CHECK(soft_threshold(-0.5, 0.2) == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(soft_threshold(0.2, 0.2) == 0.0);
}

TEST_CASE("zero signal gives zero code") {
  Rng rng(1);
  const DictionaryMatrix d = random_dictionary(6, 10, rng);
  const SparseCode code = lasso(Eigen::VectorXd::Zero(6), d, 0.1);
  CHECK(code.coefficients.isZero(0.0));
  CHECK(code.objective_value == 0.0);
  CHECK(code.converged);
}

TEST_CASE("orthonormal dictionary matches the soft-threshold closed form") {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const int p = 8;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_dictionary(p, p, rng));
    const DictionaryMatrix q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
    const Eigen::VectorXd y = random_vector(p, rng);
    const double lambda = 0.3;
    const SparseCode code = lasso(y, q, lambda, 1e-12);
    const Eigen::VectorXd proj = q.transpose() * y;
    for (int j = 0; j < p; ++j) {
      CHECK(std::abs(code.coefficients(j) - soft_threshold(proj(j), lambda)) < 1e-10);
    }
  }
}

TEST_CASE("small instance matches the bound-constrained reference") {
  Rng rng(3);
  const DictionaryMatrix d = random_dictionary(3, 5, rng);
  const Eigen::VectorXd y = random_vector(3, rng);
  const SparseCode code = lasso(y, d, 0.1, 1e-12, 100000);
  const Eigen::VectorXd ref = oracle_lasso(y, d, 0.1);
  const double f_ref = lasso_objective(y, d, ref, 0.1);
  CHECK(std::abs(code.objective_value - f_ref) <= 1e-8);
}

TEST_CASE("reported objective and KKT certificate") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int p = 4 + static_cast<int>(rng.index(28));
    const int n = 4 + static_cast<int>(rng.index(60));
    const DictionaryMatrix d = random_dictionary(p, n, rng);
    const Eigen::VectorXd y = random_vector(p, rng);
    const double lambda = rng.uniform(0.01, 1.0);
    const SparseCode code = lasso(y, d, lambda);
    const double f = lasso_objective(y, d, code.coefficients, lambda);
    CHECK(std::abs(code.objective_value - f) <= 1e-10 * std::max(1.0, std::abs(f)));
    CHECK(code.converged);
    CHECK(kkt_violation(y, d, code.coefficients, lambda) <= 10 * 1e-6);
  }
}

TEST_CASE("objective is non-increasing across sweeps") {
  Rng rng(5);
  const DictionaryMatrix d = random_dictionary(12, 30, rng);
  const Eigen::VectorXd y = random_vector(12, rng);
  const double lambda = 0.05;
  double previous = std::numeric_limits<double>::infinity();
  for (int sweeps = 1; sweeps <= 40; ++sweeps) {
    // Each prefix of max_iter replays the same deterministic sweeps.
    const SparseCode code = lasso(y, d, lambda, 1e-300, sweeps);
    CHECK(code.objective_value <= previous + 1e-12);
    previous = code.objective_value;
  }
}

TEST_CASE("scaling covariance") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const DictionaryMatrix d = random_dictionary(10, 20, rng);
    const Eigen::VectorXd y = random_vector(10, rng);
    const double c = rng.uniform(0.2, 5.0);
    const SparseCode a = lasso(y, d, 0.1, 1e-10, 10000);
    const SparseCode b = lasso(c * y, d, c * 0.1, 1e-10, 10000);
    CHECK((b.coefficients - c * a.coefficients).lpNorm<Eigen::Infinity>() <= 1e-6 * c);
  }
}

TEST_CASE("support shrinks as lambda grows") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const DictionaryMatrix d = random_dictionary(16, 40, rng);
    const Eigen::VectorXd y = random_vector(16, rng);
    Eigen::Index previous = d.cols() + 1;
    for (double lambda : {0.01, 0.1, 1.0}) {
      const SparseCode code = lasso(y, d, lambda, 1e-10, 10000);
      const Eigen::Index support = (code.coefficients.array() != 0.0).count();
      CHECK(support <= previous);
      previous = support;
    }
  }
}

TEST_CASE("warm start and residual path agree with the Gram path") {
  Rng rng(8);
  const DictionaryMatrix d = random_dictionary(20, 50, rng);
  const Eigen::VectorXd y = random_vector(20, rng);
  const SparseCode cold = lasso(y, d, 0.1, 1e-10, 10000);
  const Eigen::VectorXd warm_start = cold.coefficients + 0.01 * random_vector(50, rng);
  const SparseCode warm = lasso(y, d, 0.1, 1e-10, 10000, &warm_start);
  CHECK((warm.coefficients - cold.coefficients).lpNorm<Eigen::Infinity>() < 1e-7);

  // A dictionary beyond the Gram limit uses residual updates.
  const DictionaryMatrix wide = random_dictionary(8, LassoSolver::kGramLimit + 1, rng);
  const LassoSolver solver(wide);
  CHECK(!solver.uses_gram());
  const Eigen::VectorXd yw = random_vector(8, rng);
  const SparseCode code = solver.solve(yw, {0.5, 1e-9, 100000});
  CHECK(code.converged);
  CHECK(kkt_violation(yw, wide, code.coefficients, 0.5) <= 1e-7);
}

TEST_CASE("lasso argument and numeric errors") {
  Rng rng(9);
  const DictionaryMatrix d = random_dictionary(4, 6, rng);
  CHECK_THROWS_AS(lasso(Eigen::VectorXd::Zero(5), d, 0.1), ArgumentError);
  CHECK_THROWS_AS(lasso(Eigen::VectorXd::Zero(4), d, 0.0), ArgumentError);
  CHECK_THROWS_AS(lasso(Eigen::VectorXd::Zero(4), d, 0.1, 0.0), ArgumentError);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);
  bad(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lasso(bad, d, 0.1), NumericError);
  DictionaryMatrix dbad = d;
  dbad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(LassoSolver{dbad}, NumericError);
}

TEST_CASE("column normalization") {
  Rng rng(10);
  DictionaryMatrix d = 3.0 * random_dictionary(5, 7, rng);
  CHECK(!has_unit_columns(d));
  normalize_columns(d);
  CHECK(has_unit_columns(d));
}
