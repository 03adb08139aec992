#include <cmath>
#include <string>

#include "doctest.h"
#include "ssr/dictlearn.hpp"
#include "ssr/random.hpp"
#include "test_util.hpp"

using namespace ssr;

namespace {

Eigen::VectorXd random_vector(int p, Rng& rng) {
  Eigen::VectorXd v(p);
  for (int i = 0; i < p; ++i) v(i) = rng.normal();
  return v;
}

// Samples drawn from planted unit joint atoms [sqrt(s) h; f].
struct Planted {
  Eigen::MatrixXd atoms;
  std::vector<TrainingSample> samples;
};

Planted planted_samples(int count, int atoms, int p_low, int p_high, double noise,
                        std::uint64_t seed) {
  Rng rng(seed);
  const double s = static_cast<double>(p_low) / p_high;
  Planted out;
  out.atoms.resize(p_high + p_low, atoms);
  for (int j = 0; j < atoms; ++j) out.atoms.col(j) = random_vector(p_high + p_low, rng).normalized();
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(p_high + p_low);
    for (int k = 0; k < 3; ++k) {
      const double c = rng.uniform(0.5, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      z += c * out.atoms.col(static_cast<Eigen::Index>(rng.index(atoms)));
    }
    for (int r = 0; r < z.size(); ++r) z(r) += noise * rng.normal();
    out.samples.push_back({z.tail(p_low), z.head(p_high) / std::sqrt(s)});
  }
  return out;
}

CoupledDictionary small_dictionary(Role role, std::uint64_t seed) {
  Rng rng(seed);
  CoupledDictionary d;
  d.class_name = "cat";
  d.role = role;
  d.d_low = Eigen::MatrixXd(12, 5);
  d.d_high = Eigen::MatrixXd(9, 5);
  for (Eigen::Index i = 0; i < d.d_low.size(); ++i) d.d_low.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < d.d_high.size(); ++i) d.d_high.data()[i] = rng.normal();
  normalize_columns(d.d_low);
  d.scaling = 12.0 / 9.0;
  return d;
}

}  // namespace

TEST_CASE("one-hot samples are recovered exactly") {
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 8; ++i) {
    TrainingSample s{Eigen::VectorXd::Zero(8), Eigen::VectorXd::Zero(4)};
    s.features(i) = 1.0;
    s.high_patch(i % 4) = 0.5 * (i < 4 ? 1.0 : -1.0);
    samples.push_back(s);
  }
  TrainingConfig cfg;
  cfg.n_atoms = 8;
  cfg.lambda = 1e-9;
  cfg.epochs = 3;
  cfg.minibatch = 3;
  cfg.lasso_tol = 1e-12;
  const CoupledDictionary d = train_coupled_dictionary(samples, cfg);
  CHECK(has_unit_columns(d.d_low));
  for (const auto& s : samples) {
    const SparseCode code = lasso(s.features, d.d_low, 1e-12, 1e-14, 10000);
    CHECK((d.d_low * code.coefficients - s.features).norm() < 1e-6);
    CHECK((d.d_high * code.coefficients - s.high_patch).norm() < 1e-6);
  }
}

TEST_CASE("identical samples yield that sample as an atom") {
  Rng rng(1);
  const TrainingSample s{random_vector(12, rng), random_vector(6, rng)};
  const std::vector<TrainingSample> samples(40, s);
  TrainingConfig cfg;
  cfg.n_atoms = 4;
  cfg.lambda = 1e-10;
  cfg.epochs = 2;
  cfg.minibatch = 16;
  cfg.lasso_tol = 1e-13;
  const CoupledDictionary d = train_coupled_dictionary(samples, cfg);
  const Eigen::MatrixXd joint = joint_atoms(d);
  const Eigen::MatrixXd z = joint_samples({s}, d.scaling);
  const Eigen::VectorXd unit = z.col(0).normalized();
  double best = 0;
  for (int j = 0; j < d.atoms(); ++j) best = std::max(best, std::abs(joint.col(j).dot(unit)));
  CHECK(best > 1.0 - 1e-12);
  const SparseCode code = lasso(z.col(0), joint, 1e-10, 1e-14, 10000);
  CHECK((joint * code.coefficients - z.col(0)).norm() < 1e-8);
}

TEST_CASE("planted dictionary recovery") {
  const Planted p = planted_samples(5000, 16, 24, 8, 0.01, 7);
  TrainingConfig cfg;
  cfg.n_atoms = 16;
  cfg.epochs = 10;
  cfg.minibatch = 256;
  TrainingReport report;
  const CoupledDictionary d = train_coupled_dictionary(p.samples, cfg, "x", Role::kForeground, &report);
  const Eigen::MatrixXd joint = joint_atoms(d);
  int matched = 0;
  for (int j = 0; j < 16; ++j) {
    double best = 0;
    for (int k = 0; k < 16; ++k) best = std::max(best, std::abs(joint.col(k).dot(p.atoms.col(j))));
    matched += best > 0.95;
  }
  MESSAGE("matched atoms: " << matched);
  CHECK(matched >= 14);
  CHECK(report.has_holdout);
  REQUIRE(report.epochs.size() == 10);
  CHECK(report.epochs.back().objective < report.initial_objective);
  for (std::size_t e = 1; e < report.epochs.size(); ++e) {
    CHECK(report.epochs[e].objective <= 1.01 * report.epochs[e - 1].objective);
  }
}

TEST_CASE("objective descends, atoms stay normalised, training is deterministic") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Planted p = planted_samples(600, 12, 16, 9, 0.05, 100 + seed);
    TrainingConfig cfg;
    cfg.n_atoms = 24;
    cfg.epochs = 3;
    cfg.minibatch = 64;
    cfg.rng_seed = seed;
    TrainingReport report;
    const CoupledDictionary a = train_coupled_dictionary(p.samples, cfg, "x", Role::kBackground, &report);
    const Eigen::MatrixXd z = joint_samples(p.samples, a.scaling);
    CHECK(coding_objective(z, joint_atoms(a), cfg.lambda) < report.initial_objective);
    CHECK(has_unit_columns(a.d_low));
    CHECK(has_unit_columns(joint_atoms(a)));
    CHECK(a.scaling == doctest::Approx(16.0 / 9.0));
    CHECK(a.role == Role::kBackground);
    const CoupledDictionary b = train_coupled_dictionary(p.samples, cfg, "x", Role::kBackground);
    CHECK(a == b);
  }
}

TEST_CASE("training errors") {
  const Planted p = planted_samples(10, 4, 8, 4, 0.0, 1);
  TrainingConfig cfg;
  cfg.n_atoms = 11;
  CHECK_THROWS_AS(train_coupled_dictionary(p.samples, cfg), ArgumentError);
  cfg.n_atoms = 4;
  std::vector<TrainingSample> zeros(10, {Eigen::VectorXd::Zero(8), Eigen::VectorXd::Zero(4)});
  CHECK_THROWS_AS(train_coupled_dictionary(zeros, cfg), TrainingError);
  auto bad = p.samples;
  bad[3].features = Eigen::VectorXd::Zero(7);
  CHECK_THROWS_AS(train_coupled_dictionary(bad, cfg), ArgumentError);
}

TEST_CASE("dictionary file round trip and corruption") {
  ssr::testing::TempDir dir("dict");
  const CoupledDictionary d = small_dictionary(Role::kBackground, 3);
  save_dictionary(d, dir / "d.ssrdict");
  const CoupledDictionary back = load_dictionary(dir / "d.ssrdict");
  CHECK(back == d);
  const auto bytes = ssr::testing::file_bytes(dir / "d.ssrdict");
  CHECK(bytes.size() == 8 + 32 + 3 + 8 * (5 * 21 + 1));

  auto truncated = bytes;
  truncated.resize(truncated.size() - 5);
  ssr::testing::write_bytes(dir / "t.ssrdict", truncated);
  CHECK_THROWS_AS(load_dictionary(dir / "t.ssrdict"), FormatError);

  auto magic = bytes;
  magic[3] = 'X';
  ssr::testing::write_bytes(dir / "m.ssrdict", magic);
  try {
    load_dictionary(dir / "m.ssrdict");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("SSRDICT1") != std::string::npos);
  }

  auto version = bytes;
  version[8] = 2;
  ssr::testing::write_bytes(dir / "v.ssrdict", version);
  CHECK_THROWS_AS(load_dictionary(dir / "v.ssrdict"), FormatError);

  auto dims = bytes;
  dims[12] = 6;  // atom count
  ssr::testing::write_bytes(dir / "n.ssrdict", dims);
  CHECK_THROWS_AS(load_dictionary(dir / "n.ssrdict"), FormatError);
  CHECK_THROWS_AS(load_dictionary(dir / "missing.ssrdict"), IoError);
}

TEST_CASE("dictionary statistics") {
  const CoupledDictionary fg = small_dictionary(Role::kForeground, 5);
  CoupledDictionary same = fg;
  same.role = Role::kBackground;
  const DictionaryStats eq = dictionary_stats(fg, same, 3, 1);
  CHECK(eq.fg_counts == eq.bg_counts);

  const CoupledDictionary bg = small_dictionary(Role::kBackground, 6);
  const DictionaryStats single = dictionary_stats(fg, bg, 10, 1);
  int fg_sum = 0, bg_sum = 0;
  for (int c = 0; c < 10; ++c) {
    CHECK(single.fg_counts[c] + single.bg_counts[c] == 1);
    fg_sum += single.fg_counts[c];
    bg_sum += single.bg_counts[c];
  }
  CHECK(fg_sum == 5);
  CHECK(bg_sum == 5);
  CHECK_THROWS_AS(dictionary_stats(fg, bg, 11, 1), ArgumentError);

  // Two well separated clouds around +e0 and -e0.
  Rng rng(9);
  CoupledDictionary a = fg, b = bg;
  for (int j = 0; j < 5; ++j) {
    Eigen::VectorXd v = 0.05 * random_vector(12, rng);
    v(0) += 1.0;
    a.d_low.col(j) = v.normalized();
    v = 0.05 * random_vector(12, rng);
    v(0) -= 1.0;
    b.d_low.col(j) = v.normalized();
  }
  const DictionaryStats two = dictionary_stats(a, b, 2, 4);
  CHECK(((two.fg_counts == std::vector<int>{5, 0} && two.bg_counts == std::vector<int>{0, 5}) ||
         (two.fg_counts == std::vector<int>{0, 5} && two.bg_counts == std::vector<int>{5, 0})));
  CoupledDictionary wrong = bg;
  wrong.d_low = Eigen::MatrixXd::Identity(11, 5);
  CHECK_THROWS_AS(dictionary_stats(fg, wrong, 2, 1), ArgumentError);
}
