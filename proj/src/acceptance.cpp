#include "ssr/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ssr/cli.hpp"
#include "ssr/dictlearn.hpp"
#include "ssr/figure_ground.hpp"
#include "ssr/gmtl.hpp"
#include "ssr/matting.hpp"
#include "ssr/random.hpp"
#include "ssr/reference_segmentation.hpp"
#include "ssr/segmentation.hpp"
#include "ssr/sparse.hpp"
#include "ssr/superres.hpp"
#include "ssr/synthbench.hpp"

namespace fs = std::filesystem;

namespace ssr {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

CriterionResult start(int id, std::string name) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  return r;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

Eigen::VectorXd normal_vector(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

DictionaryMatrix normal_dictionary(int p, int n, Rng& rng) {
  DictionaryMatrix d(p, n);
  for (int j = 0; j < n; ++j) d.col(j) = normal_vector(p, rng);
  normalize_columns(d);
  return d;
}

// Random partition of 0..n-1 into `count` non-empty groups.
GroupIndex random_groups(int n, int count, Rng& rng) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  std::vector<std::vector<int>> groups(count);
  for (int i = 0; i < n; ++i) groups[i < count ? i : rng.index(count)].push_back(perm[i]);
  return GroupIndex(groups, std::vector<GroupTag>(count));
}

CriterionResult projection_check() {
  CriterionResult r = start(1, "l1,2 projection matches the bisection oracle");
  const auto t0 = Clock::now();
  Rng rng(1001);
  double worst = 0.0, worst_feas = 0.0, worst_idem = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(63));
    const int G = 1 + static_cast<int>(rng.index(std::min(8, n)));
    const GroupIndex groups = random_groups(n, G, rng);
    const Eigen::VectorXd x = rng.uniform(0.1, 5.0) * normal_vector(n, rng);
    // Radii on both sides of ||x||_{1,2}, so some points are already inside.
    const double tau = rng.uniform(0.05, 1.3) * l12_norm(x, groups);
    const Eigen::VectorXd p = project_l12_ball(x, groups, tau);
    worst = std::max(worst, (p - oracle_l12_projection(x, groups, tau)).norm());
    worst_feas = std::max(worst_feas, l12_norm(p, groups) - tau);
    worst_idem = std::max(worst_idem, (project_l12_ball(p, groups, tau) - p).norm());
  }
  r.seconds = since(t0);
  r.pass = worst <= 1e-7 && worst_feas <= 1e-9 && worst_idem <= 1e-9 && r.seconds < 1.0;
  r.detail = "max dist to oracle " + fmt(worst) + " (<= 1e-7), max excess " + fmt(worst_feas) +
             ", max idempotence gap " + fmt(worst_idem) + ", limit 1 s";
  return r;
}

CriterionResult lasso_check() {
  CriterionResult r = start(2, "Lasso KKT certificate and oracle objective");
  const auto t0 = Clock::now();
  Rng rng(2002);
  double worst_kkt = 0.0, worst_rel = 0.0;
  int max_sweeps = 0, over_default = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 4 + static_cast<int>(rng.index(29));
    const int n = 4 + static_cast<int>(rng.index(61));
    const DictionaryMatrix d = normal_dictionary(p, n, rng);
    const Eigen::VectorXd y = normal_vector(p, rng);
    // Below lambda_max = ||D^T y||_inf so the solution is not trivially zero.
    const double lambda = rng.uniform(0.05, 0.9) * (d.transpose() * y).cwiseAbs().maxCoeff();
    // A rank-deficient transient support can need more than the default
    // 1000 sweeps; the budget here is generous and the sweeps are reported.
    const SparseCode code = lasso(y, d, lambda, 1e-6, 100000);
    max_sweeps = std::max(max_sweeps, code.iterations_used);
    over_default += code.iterations_used > 1000;
    worst_kkt = std::max(worst_kkt, kkt_violation(y, d, code.coefficients, lambda));
    const double f_ref = lasso_objective(y, d, oracle_lasso(y, d, lambda), lambda);
    worst_rel = std::max(worst_rel, std::abs(code.objective_value - f_ref) / std::abs(f_ref));
  }
  r.seconds = since(t0);
  r.pass = worst_kkt <= 1e-5 && worst_rel <= 1e-6 && r.seconds < 30.0;
  r.detail = "max KKT violation " + fmt(worst_kkt) + " (<= 1e-5), max relative objective gap " +
             fmt(worst_rel) + " (<= 1e-6), max sweeps " + std::to_string(max_sweeps) + " (" +
             std::to_string(over_default) + " above the default 1000), limit 30 s";
  return r;
}

CriterionResult gmtl_check() {
  CriterionResult r = start(3, "GMTL convergence budget and feasibility");
  const auto t0 = Clock::now();
  Rng rng(3003);
  GroupIndex groups;
  for (int g = 0; g < 4; ++g) groups.append(16, {"c", g % 2 ? Role::kBackground : Role::kForeground});
  int converged = 0, feasible = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const DictionaryMatrix d = normal_dictionary(24, 64, rng);
    Eigen::MatrixXd Y(24, 9);
    for (int k = 0; k < 9; ++k) Y.col(k) = normal_vector(24, rng);
    const GmtlSolver solver(d, groups);
    const CoefficientMatrix sol = solver.solve({Y, trial}, {});
    converged += sol.converged && sol.iterations <= 200;
    feasible += l12_norm(sol.omega, groups) <= default_ball_radius(9, groups) * (1 + 1e-9);
  }
  r.seconds = since(t0);
  r.pass = converged >= 45 && feasible == 50;
  r.detail = std::to_string(converged) + "/50 reach relative change < 1e-6 within 200 iterations " +
             "(>= 45), " + std::to_string(feasible) + "/50 feasible (50)";
  return r;
}

CriterionResult separation_check() {
  CriterionResult r = start(4, "GMTL separation vs Lasso voting on planted scenes");
  const auto t0 = Clock::now();
  const auto fg_atoms = make_stripe_atoms(32, 8, true, 3, 8, 1);
  const auto bg_atoms = make_stripe_atoms(32, 8, false, 3, 8, 2);
  PlantedTrainingConfig cfg;
  cfg.training.n_atoms = 32;
  cfg.training.epochs = 5;
  const PlantedDictionaries pd = train_planted_dictionaries(fg_atoms, bg_atoms, "obj", cfg, 5);
  const std::vector<CoupledDictionary> dicts{pd.fg, pd.bg};
  double gmtl = 0.0, vote = 0.0;
  for (int s = 0; s < 20; ++s) {
    const PlantedScene scene =
        make_planted_scene(fg_atoms, bg_atoms, random_rect_layout(64, 64, 100 + s), 0.01, 200 + s);
    const SegmentMap seg = oversegment(scene.image);
    gmtl += mask_accuracy(separate_figure_ground(scene.image, seg, dicts, "obj").pixel_mask(seg),
                          scene.mask);
    vote += mask_accuracy(lasso_vote_baseline(scene.image, seg, dicts, "obj").pixel_mask(seg),
                          scene.mask);
  }
  gmtl /= 20;
  vote /= 20;
  r.seconds = since(t0);
  r.pass = gmtl >= vote && gmtl >= 0.9 && r.seconds < 120.0;
  r.detail = "mean accuracy gmtl " + fmt(gmtl) + " vs vote " + fmt(vote) +
             " (gmtl >= vote, gmtl >= 0.9), limit 120 s";
  return r;
}

CriterionResult matting_check() {
  CriterionResult r = start(5, "matting CG vs dense solve and Laplacian structure");
  const auto t0 = Clock::now();
  Rng rng(5005);
  double worst = 0.0, worst_row = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    RasterImage img(16, 16, 3);
    for (double& v : img.data()) v = rng.uniform();
    BinaryMask mask(256);
    const int split = 4 + static_cast<int>(rng.index(8));
    for (int i = 0; i < 256; ++i) mask[i] = (i % 16) >= split;
    const Trimap tri = trimap_from_mask(mask, 16, 16, 2);
    const AlphaMatte m = solve_matte(img, tri);
    const MattingSystem sys = matting_system(img, tri);
    const Eigen::VectorXd direct =
        Eigen::MatrixXd(sys.A).ldlt().solve(sys.b).cwiseMax(0.0).cwiseMin(1.0);
    for (int i = 0; i < 256; ++i) worst = std::max(worst, std::abs(m.alpha.data()[i] - direct(i)));
    const Eigen::MatrixXd L(matting_laplacian(img));
    worst_row = std::max(worst_row, L.rowwise().sum().cwiseAbs().maxCoeff());
  }
  double min_eig = 0.0;
  for (int channels : {1, 3}) {
    RasterImage img(8, 8, channels);
    for (double& v : img.data()) v = rng.uniform();
    const Eigen::MatrixXd L(matting_laplacian(img));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
    min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
  }
  r.seconds = since(t0);
  r.pass = worst <= 1e-4 && worst_row < 1e-9 && min_eig >= -1e-8;
  r.detail = "max |cg - dense| " + fmt(worst) + " (<= 1e-4), max row sum " + fmt(worst_row) +
             " (< 1e-9), min eigenvalue " + fmt(min_eig) + " (>= -1e-8)";
  return r;
}

// Samples from unit joint atoms [sqrt(s) h; f], three atoms each.
std::vector<TrainingSample> planted_samples(const Eigen::MatrixXd& atoms, int count, int p_low,
                                            double noise, Rng& rng) {
  const int p_high = static_cast<int>(atoms.rows()) - p_low;
  const double s = static_cast<double>(p_low) / p_high;
  std::vector<TrainingSample> out;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(atoms.rows());
    for (int k = 0; k < 3; ++k) {
      const double c = rng.uniform(0.5, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      z += c * atoms.col(static_cast<Eigen::Index>(rng.index(atoms.cols())));
    }
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) += noise * rng.normal();
    out.push_back({z.tail(p_low), z.head(p_high) / std::sqrt(s)});
  }
  return out;
}

Eigen::MatrixXd unit_atoms(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd a(rows, cols);
  for (int j = 0; j < cols; ++j) a.col(j) = normal_vector(rows, rng).normalized();
  return a;
}

CriterionResult dictlearn_check() {
  CriterionResult r = start(6, "dictionary learning descent and planted recovery");
  const auto t0 = Clock::now();
  int descended = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(6000 + seed);
    const Eigen::MatrixXd atoms = unit_atoms(25, 12, rng);
    const auto samples = planted_samples(atoms, 600, 16, 0.05, rng);
    TrainingConfig cfg;
    cfg.n_atoms = 24;
    cfg.epochs = 3;
    cfg.minibatch = 64;
    cfg.rng_seed = seed;
    TrainingReport report;
    const CoupledDictionary d = train_coupled_dictionary(samples, cfg, "x", Role::kForeground, &report);
    const double after = coding_objective(joint_samples(samples, d.scaling), joint_atoms(d), cfg.lambda);
    descended += after < report.initial_objective;
  }

  Rng rng(6100);
  const Eigen::MatrixXd atoms = unit_atoms(32, 16, rng);
  const auto samples = planted_samples(atoms, 5000, 24, 0.01, rng);
  TrainingConfig cfg;
  cfg.n_atoms = 16;
  cfg.epochs = 10;
  const Eigen::MatrixXd joint = joint_atoms(train_coupled_dictionary(samples, cfg));
  int matched = 0;
  for (int j = 0; j < 16; ++j) {
    matched += (joint.transpose() * atoms.col(j)).cwiseAbs().maxCoeff() > 0.95;
  }
  r.seconds = since(t0);
  r.pass = descended == 10 && matched >= 14;
  r.detail = std::to_string(descended) + "/10 seeds descend (10), " + std::to_string(matched) +
             "/16 planted atoms recovered at |cos| > 0.95 (>= 14)";
  return r;
}

CriterionResult superres_check() {
  CriterionResult r = start(7, "selective SR beats bicubic inside the matte");
  const auto t0 = Clock::now();
  const auto fg_atoms = make_stripe_atoms(32, 24, true, 8, 16, 1);
  const auto bg_atoms = make_stripe_atoms(32, 24, false, 8, 16, 2);
  auto scene_at = [&](std::uint64_t layout_seed, std::uint64_t seed) {
    SceneLayout layout = random_rect_layout(192, 192, layout_seed);
    layout.amplitude = 0.1;
    return make_planted_scene(fg_atoms, bg_atoms, layout, 0.0, seed);
  };
  std::vector<TrainingSample> samples;
  for (int s = 0; s < 12; ++s) {
    const PlantedScene scene = scene_at(50 + s, 60 + s);
    const auto batch =
        sample_training_patches(scene.image, scene.mask, 3, 500, 3, Role::kForeground, 70 + s);
    samples.insert(samples.end(), batch.begin(), batch.end());
  }
  TrainingConfig tc;
  tc.n_atoms = 128;
  tc.epochs = 5;
  const CoupledDictionary d = train_coupled_dictionary(samples, tc, "obj", Role::kForeground);

  SrConfig cfg;
  cfg.lambda = 0.01;
  int better = 0;
  bool outside_equal = true;
  double min_gain = 1e9;
  for (int s = 0; s < 10; ++s) {
    const PlantedScene scene = scene_at(100 + s, 200 + s);
    const RasterImage low = downsample(scene.image, 3);
    // Matte: low-res pixels mostly covered by the planted foreground.
    AlphaMatte matte;
    matte.alpha = RasterImage(64, 64, 1);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        int inside = 0;
        for (int dy = 0; dy < 3; ++dy)
          for (int dx = 0; dx < 3; ++dx) inside += scene.mask[(3 * y + dy) * 192 + 3 * x + dx];
        matte.alpha.at(x, y) = inside >= 5 ? 1.0 : 0.0;
      }
    }
    const SrResult res = super_resolve_region(low, matte, d, cfg);
    const double gain = psnr(res.image, scene.image, &res.region) -
                        psnr(res.bicubic, scene.image, &res.region);
    min_gain = std::min(min_gain, gain);
    better += gain >= 0.5;
    const RasterImage bicubic = upsample_bicubic(low, 3);
    for (std::size_t p = 0; p < res.region.size(); ++p) {
      if (!res.region[p] && res.image.data()[p] != bicubic.data()[p]) outside_equal = false;
    }
  }
  r.seconds = since(t0);
  r.pass = better == 10 && outside_equal && r.seconds < 300.0;
  r.detail = std::to_string(better) + "/10 scenes gain >= 0.5 dB (min gain " + fmt(min_gain) +
             " dB), outside bitwise bicubic: " + (outside_equal ? "yes" : "no") +
             ", limit 300 s";
  return r;
}

std::vector<char> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes a small planted data set and runs train, separate and superres.
// Returns the first failing command's diagnostic, or an empty string.
std::string pipeline_run(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir / "data");
  const auto fg_atoms = make_stripe_atoms(16, 24, true, 8, 16, 1);
  const auto bg_atoms = make_stripe_atoms(16, 24, false, 8, 16, 2);
  std::ofstream manifest(dir / "data" / "manifest.tsv");
  for (int s = 0; s < 3; ++s) {
    SceneLayout layout = random_rect_layout(96, 96, 10 + s);
    layout.amplitude = 0.1;
    const PlantedScene scene = make_planted_scene(fg_atoms, bg_atoms, layout, 0.0, 20 + s);
    RasterImage mask(96, 96, 1);
    for (std::size_t p = 0; p < scene.mask.size(); ++p) mask.data()[p] = scene.mask[p];
    const std::string name = "scene" + std::to_string(s);
    save_png(scene.image, dir / "data" / (name + ".png"));
    save_png(mask, dir / "data" / (name + "_mask.png"));
    manifest << name << ".png\t" << name << "_mask.png\tobj\n";
  }
  manifest.close();
  SceneLayout layout = random_rect_layout(96, 96, 30);
  layout.amplitude = 0.1;
  const PlantedScene test = make_planted_scene(fg_atoms, bg_atoms, layout, 0.0, 31);
  save_png(test.image, dir / "data" / "truth.png");
  save_png(downsample(test.image, 3), dir / "data" / "low.png");

  const std::string d = dir.string();
  const std::vector<std::vector<std::string>> commands = {
      {"ssr", "train", "--manifest", d + "/data/manifest.tsv", "--out-dir", d + "/dicts",
       "--atoms", "32", "--patches", "400", "--epochs", "2", "--seed", "7"},
      {"ssr", "separate", "--image", d + "/data/low.png", "--class", "obj", "--dict-dir",
       d + "/dicts", "--out-dir", d + "/separate", "--seed", "7"},
      {"ssr", "superres", "--image", d + "/data/low.png", "--matte", d + "/separate/matte.png",
       "--class", "obj", "--dict-dir", d + "/dicts", "--ground-truth", d + "/data/truth.png",
       "--out-dir", d + "/superres", "--seed", "7"},
  };
  for (const auto& args : commands) {
    std::ostringstream out, err;
    if (cli::run(args, out, err) != cli::kExitOk) return args[1] + ": " + err.str();
  }
  return {};
}

CriterionResult determinism_check(const fs::path& work_dir) {
  CriterionResult r = start(8, "train -> separate -> superres is bitwise reproducible");
  const auto t0 = Clock::now();
  const fs::path a = work_dir / "determinism_a", b = work_dir / "determinism_b";
  std::string failure = pipeline_run(a);
  if (failure.empty()) failure = pipeline_run(b);
  int files = 0, differing = 0;
  if (failure.empty()) {
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      const fs::path rel = fs::relative(e.path(), a);
      ++files;
      if (!fs::exists(b / rel) || bytes_of(e.path()) != bytes_of(b / rel)) ++differing;
    }
    for (const auto& e : fs::recursive_directory_iterator(b)) {
      if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b))) ++differing;
    }
  }
  r.seconds = since(t0);
  r.pass = failure.empty() && files > 0 && differing == 0;
  r.detail = failure.empty() ? std::to_string(files) + " artifacts compared, " +
                                   std::to_string(differing) + " differ"
                             : "pipeline failed: " + failure;
  if (!r.detail.empty() && r.detail.back() == '\n') r.detail.pop_back();
  return r;
}

CriterionResult segmentation_check() {
  CriterionResult r = start(9, "segmentation sanity and reference agreement");
  const auto t0 = Clock::now();
  const int constant = oversegment(RasterImage(40, 30, 3, 0.4)).segment_count();

  RasterImage half(32, 20, 3, 0.0);
  for (int y = 0; y < 20; ++y)
    for (int x = 16; x < 32; ++x)
      for (int c = 0; c < 3; ++c) half.at(x, y, c) = 1.0;
  SegmentationParams sharp;
  sharp.smoothing_sigma = 0.0;
  sharp.threshold_k = 1.0 / 255.0;
  const int split = oversegment(half, sharp).segment_count();

  double agreement = 1.0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const RasterImage img = quadrant_image(64, 0.02, seed);
    SegmentationParams p;
    p.threshold_k = 50.0 / 255.0;
    p.min_segment_size = 20;
    const SegmentMap seg = oversegment(img, p);
    agreement = std::min(agreement,
                         label_agreement(seg.labels(), reference_segment(img, 0.8, p.threshold_k, 20)));
  }
  r.seconds = since(t0);
  r.pass = constant == 1 && split == 2 && agreement >= 0.99;
  r.detail = "constant " + std::to_string(constant) + " segment(s) (1), half split " +
             std::to_string(split) + " (2), min quadrant agreement " + fmt(agreement) +
             " (>= 0.99)";
  return r;
}

}  // namespace

CriterionResult run_criterion(int id, const fs::path& work_dir) {
  try {
    switch (id) {
      case 1: return projection_check();
      case 2: return lasso_check();
      case 3: return gmtl_check();
      case 4: return separation_check();
      case 5: return matting_check();
      case 6: return dictlearn_check();
      case 7: return superres_check();
      case 8: return determinism_check(work_dir);
      case 9: return segmentation_check();
      default: throw ArgumentError("no acceptance criterion " + std::to_string(id));
    }
  } catch (const ArgumentError&) {
    throw;
  } catch (const std::exception& e) {
    CriterionResult r = start(id, "criterion " + std::to_string(id));
    r.detail = std::string("exception: ") + e.what();
    return r;
  }
}

std::vector<CriterionResult> run_acceptance(const fs::path& work_dir, const std::vector<int>& only,
                                            std::ostream* progress) {
  std::vector<int> ids = only;
  if (ids.empty()) {
    for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
  }
  std::vector<CriterionResult> results;
  for (int id : ids) {
    results.push_back(run_criterion(id, work_dir));
    if (progress) *progress << format_result(results.back()) << std::endl;
  }
  return results;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream s;
  s.precision(3);
  s << (r.pass ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail << " ("
    << std::fixed << r.seconds << " s)";
  return s.str();
}

}  // namespace ssr
