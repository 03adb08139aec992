#include <cmath>
#include <limits>

#include "doctest.h"
#include "ssr/gmtl.hpp"
#include "ssr/random.hpp"
#include "ssr/synthbench.hpp"

using namespace ssr;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

DictionaryMatrix random_dictionary(int p, int n, Rng& rng) {
  DictionaryMatrix d = random_matrix(p, n, rng);
  normalize_columns(d);
  return d;
}

GroupIndex equal_groups(int count, int size) {
  GroupIndex groups;
  for (int g = 0; g < count; ++g) {
    groups.append(size, {"obj", g % 2 == 0 ? Role::kForeground : Role::kBackground});
  }
  return groups;
}

// Random partition of 0..n-1 into `count` non-empty groups.
GroupIndex random_groups(int n, int count, Rng& rng) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  std::vector<std::vector<int>> groups(count);
  for (int i = 0; i < n; ++i) groups[i < count ? i : rng.index(count)].push_back(perm[i]);
  std::vector<GroupTag> tags(count, {"obj", Role::kForeground});
  return GroupIndex(groups, tags);
}

}  // namespace

TEST_CASE("group index validation") {
  CHECK_NOTHROW(GroupIndex({{0, 2}, {1}}, {{"a", Role::kForeground}, {"a", Role::kBackground}}));
  CHECK_THROWS_AS(GroupIndex({{0, 1}, {1}}, {{"a", Role::kForeground}, {"a", Role::kBackground}}),
                  ArgumentError);
  CHECK_THROWS_AS(GroupIndex({{0, 3}, {1}}, {{"a", Role::kForeground}, {"a", Role::kBackground}}),
                  ArgumentError);
  CHECK_THROWS_AS(GroupIndex({{0}}, {}), ArgumentError);
  const GroupIndex g = equal_groups(3, 4);
  CHECK(g.total_size() == 12);
  CHECK(g.group(2).front() == 8);
  CHECK(g.mean_group_size() == 4.0);
}

TEST_CASE("projection of a point inside the ball is the identity") {
  Rng rng(1);
  const GroupIndex groups = equal_groups(4, 3);
  const Eigen::VectorXd x = 0.01 * random_matrix(12, 1, rng);
  CHECK(project_l12_ball(x, groups, 10.0) == x);
}

TEST_CASE("single group degenerates to the l2 ball") {
  Rng rng(2);
  const GroupIndex groups = equal_groups(1, 7);
  const Eigen::VectorXd x = 5.0 * random_matrix(7, 1, rng);
  const Eigen::VectorXd p = project_l12_ball(x, groups, 1.5);
  CHECK((p - 1.5 * x / x.norm()).norm() < 1e-12);
}

TEST_CASE("projection matches the bisection reference") {
  Rng rng(3);
  const GroupIndex groups = equal_groups(4, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = random_matrix(12, 1, rng);
    const Eigen::VectorXd p = project_l12_ball(x, groups, 1.0);
    CHECK((p - oracle_l12_projection(x, groups, 1.0)).norm() <= 1e-7);
    CHECK(std::abs(l12_norm(p, groups) - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS(project_l12_ball(Eigen::VectorXd::Ones(12), groups, -1.0), ArgumentError);
  CHECK(project_l12_ball(Eigen::VectorXd::Ones(12), groups, 0.0).isZero(0.0));
  CHECK_THROWS_AS(project_l12_ball(Eigen::VectorXd::Ones(11), groups, 1.0), ArgumentError);
}

TEST_CASE("projection is the nearest feasible point and idempotent") {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 8 + static_cast<int>(rng.index(40));
    const GroupIndex groups = random_groups(n, 1 + static_cast<int>(rng.index(8)), rng);
    const Eigen::VectorXd x = random_matrix(n, 1, rng);
    const double tau = rng.uniform(0.1, 3.0);
    const Eigen::VectorXd p = project_l12_ball(x, groups, tau);
    const double dist = (p - x).norm();
    for (int k = 0; k < 1000; ++k) {
      Eigen::VectorXd z = random_matrix(n, 1, rng);
      const double norm = l12_norm(z, groups);
      z *= tau * rng.uniform() / norm;
      CHECK((z - x).norm() >= dist - 1e-12);
    }
    CHECK((project_l12_ball(p, groups, tau) - p).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("matrix projection treats each row block as one group") {
  Rng rng(5);
  const GroupIndex groups = equal_groups(3, 2);
  Eigen::MatrixXd m = random_matrix(6, 4, rng);
  const Eigen::MatrixXd original = m;
  project_l12_ball(m, groups, 0.7);
  // Same as projecting the vectorised blocks with a regrouped index.
  std::vector<std::vector<int>> vg(3);
  Eigen::VectorXd v(24);
  int k = 0;
  for (int g = 0; g < 3; ++g)
    for (int i : groups.group(g))
      for (int c = 0; c < 4; ++c) {
        v(k) = original(i, c);
        vg[g].push_back(k++);
      }
  const GroupIndex vgroups(vg, std::vector<GroupTag>(3));
  const Eigen::VectorXd pv = project_l12_ball(v, vgroups, 0.7);
  k = 0;
  for (int g = 0; g < 3; ++g)
    for (int i : groups.group(g))
      for (int c = 0; c < 4; ++c) CHECK(std::abs(m(i, c) - pv(k++)) < 1e-14);
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(6);
  const DictionaryMatrix d = random_dictionary(5, 7, rng);
  const Eigen::MatrixXd Y = random_matrix(5, 3, rng);
  const Eigen::MatrixXd omega = random_matrix(7, 3, rng);
  const Eigen::MatrixXd grad = d.transpose() * (d * omega - Y);
  const double h = 1e-5;
  for (int i = 0; i < 7; ++i)
    for (int k = 0; k < 3; ++k) {
      Eigen::MatrixXd plus = omega, minus = omega;
      plus(i, k) += h;
      minus(i, k) -= h;
      const double fd =
          (0.5 * gmtl_objective(Y, d, plus) - 0.5 * gmtl_objective(Y, d, minus)) / (2 * h);
      CHECK(std::abs(fd - grad(i, k)) <= 1e-5 * std::max(1.0, std::abs(grad(i, k))));
    }
}

TEST_CASE("degenerate batches") {
  Rng rng(7);
  const DictionaryMatrix d = random_dictionary(6, 8, rng);
  const GroupIndex groups = equal_groups(2, 4);
  GmtlConfig cfg;
  cfg.C = 2.0;
  const CoefficientMatrix zero = gmtl_solve({Eigen::MatrixXd::Zero(6, 3), 0}, d, groups, cfg);
  CHECK(zero.omega.isZero(0.0));
  CHECK(zero.objective == 0.0);
  cfg.C = 0.0;
  const CoefficientMatrix c0 = gmtl_solve({random_matrix(6, 3, rng), 0}, d, groups, cfg);
  CHECK(c0.omega.isZero(0.0));
}

TEST_CASE("solution matches the penalized-form reference at the same radius") {
  Rng rng(8);
  for (int trial = 0; trial < 3; ++trial) {
    const DictionaryMatrix d = random_dictionary(6, 8, rng);
    const GroupIndex groups = equal_groups(2, 4);
    const Eigen::MatrixXd Y = random_matrix(6, 3, rng);
    GmtlConfig cfg;
    cfg.C = 2.0;
    cfg.tol = 1e-15;
    cfg.max_iter = 100000;
    const CoefficientMatrix sol = gmtl_solve({Y, 0}, d, groups, cfg);
    const Eigen::MatrixXd ref = oracle_gmtl(Y, d, groups, 2.0);
    const double f_ref = gmtl_objective(Y, d, ref);
    CHECK(l12_norm(ref, groups) <= 2.0 + 1e-8);
    CHECK(std::abs(sol.objective - f_ref) <= 1e-6 * f_ref);
  }
}

TEST_CASE("feasibility and monotone descent with the automatic step") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const DictionaryMatrix d = random_dictionary(24, 64, rng);
    const GroupIndex groups = equal_groups(4, 16);
    const Eigen::MatrixXd Y = random_matrix(24, 9, rng);
    const GmtlSolver solver(d, groups);
    const CoefficientMatrix sol = solver.solve({Y, trial}, {});
    CHECK(l12_norm(sol.omega, groups) <= default_ball_radius(9, groups) + 1e-8);
    for (std::size_t i = 1; i < sol.objective_history.size(); ++i) {
      CHECK(sol.objective_history[i] <= sol.objective_history[i - 1] * (1 + 1e-12));
    }
    CHECK(sol.objective == doctest::Approx(gmtl_objective(Y, d, sol.omega)).epsilon(1e-12));
  }
}

TEST_CASE("spectral norm estimate") {
  Rng rng(10);
  const DictionaryMatrix d = random_dictionary(10, 15, rng);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d.transpose() * d);
  CHECK(spectral_norm_gram(d, 500) == doctest::Approx(eig.eigenvalues().maxCoeff()).epsilon(1e-6));
  CHECK(spectral_norm_gram(DictionaryMatrix::Zero(3, 4)) == 0.0);
}

TEST_CASE("a small radius activates only the dominant group") {
  Rng rng(11);
  const DictionaryMatrix d = random_dictionary(12, 12, rng);
  const GroupIndex groups = equal_groups(3, 4);
  Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(12, 4);
  truth.topRows(4) = random_matrix(4, 4, rng);
  const Eigen::MatrixXd Y = d * truth;
  const double C = 0.05;
  const Eigen::MatrixXd ref = oracle_gmtl(Y, d, groups, C);
  int active = 0;
  for (int g = 0; g < 3; ++g) {
    double s = 0;
    for (int i : groups.group(g)) s += ref.row(i).squaredNorm();
    active += std::sqrt(s) > 1e-10;
  }
  REQUIRE(active == 1);
  GmtlConfig cfg;
  cfg.C = C;
  cfg.max_iter = 5000;
  const CoefficientMatrix sol = gmtl_solve({Y, 0}, d, groups, cfg);
  for (int g = 0; g < 3; ++g) {
    double s = 0;
    for (int i : groups.group(g)) s += ref.row(i).squaredNorm();
    if (std::sqrt(s) > 1e-10) continue;
    for (int i : groups.group(g)) CHECK(sol.omega.row(i).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("classification rule") {
  const GroupIndex groups = equal_groups(2, 3);
  const SegmentScore none = classify_segment(Eigen::MatrixXd::Zero(6, 2), groups, "obj");
  CHECK(none.fg_score == 0.0);
  CHECK(none.bg_score == 0.0);
  CHECK(!none.foreground);
  Eigen::MatrixXd fg = Eigen::MatrixXd::Zero(6, 2);
  fg(1, 0) = -0.5;
  fg(2, 1) = 0.25;
  const SegmentScore s = classify_segment(fg, groups, "obj");
  CHECK(s.foreground);
  CHECK(s.fg_score == doctest::Approx(0.375));
  CHECK_THROWS_AS(classify_segment(fg, groups, "other"), ArgumentError);
}

TEST_CASE("planted fg support is classified as foreground, invariant to scale") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const DictionaryMatrix d = random_dictionary(24, 32, rng);
    const GroupIndex groups = equal_groups(2, 16);
    Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(32, 6);
    for (int k = 0; k < 6; ++k)
      for (int j = 0; j < 3; ++j) truth(rng.index(16), k) = rng.uniform(0.5, 1.0);
    const Eigen::MatrixXd Y = d * truth;
    GmtlConfig cfg;
    const CoefficientMatrix sol = gmtl_solve({Y, 0}, d, groups, cfg);
    const SegmentScore s = classify_segment(sol, groups, "obj");
    CHECK(s.fg_score > s.bg_score);
    for (double c : {0.1, 7.0}) {
      GmtlConfig scaled = cfg;
      scaled.C = c * default_ball_radius(6, groups);
      const SegmentScore sc = classify_segment(gmtl_solve({c * Y, 0}, d, groups, scaled), groups, "obj");
      CHECK(sc.foreground == s.foreground);
    }
  }
}

TEST_CASE("solver argument errors") {
  Rng rng(13);
  const DictionaryMatrix d = random_dictionary(4, 6, rng);
  const GroupIndex groups = equal_groups(2, 3);
  GmtlConfig cfg;
  cfg.eta = 0.0;
  CHECK_THROWS_AS(gmtl_solve({random_matrix(4, 2, rng), 0}, d, groups, cfg), ArgumentError);
  cfg.eta.reset();
  CHECK_THROWS_AS(gmtl_solve({random_matrix(5, 2, rng), 0}, d, groups, cfg), ArgumentError);
  Eigen::MatrixXd bad = random_matrix(4, 2, rng);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gmtl_solve({bad, 0}, d, groups, cfg), NumericError);
  CHECK_THROWS_AS(GmtlSolver(d, equal_groups(3, 3)), ArgumentError);
}
