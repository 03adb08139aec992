#include "ssr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "ssr/acceptance.hpp"
#include "ssr/effects.hpp"
#include "ssr/figure_ground.hpp"
#include "ssr/matting.hpp"
#include "ssr/segmentation.hpp"
#include "ssr/superres.hpp"
#include "ssr/synthbench.hpp"

namespace fs = std::filesystem;

namespace ssr::cli {

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<ManifestRow> rows;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected image<TAB>mask<TAB>class");
    }
    auto resolve = [&](const std::string& p) {
      const fs::path q(p);
      return q.is_absolute() ? q : base / q;
    };
    rows.push_back({resolve(fields[0]), resolve(fields[1]), fields[2]});
  }
  return rows;
}

fs::path dictionary_path(const fs::path& dir, const std::string& class_name, Role role) {
  return dir / (class_name + "_" + role_name(role) + ".ssrdict");
}

std::vector<CoupledDictionary> load_dictionaries(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dictionary directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ssrdict") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<CoupledDictionary> dicts;
  for (const auto& f : files) dicts.push_back(load_dictionary(f));
  return dicts;
}

void save_dict_stats_csv(const DictionaryStats& stats, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << "cluster,fg_count,bg_count\n";
  for (int c = 0; c < stats.cluster_count; ++c) {
    f << c << ',' << stats.fg_counts[c] << ',' << stats.bg_counts[c] << '\n';
  }
  if (!f) throw IoError("write failed for " + path.string());
}

RasterImage render_dict_stats(const DictionaryStats& stats) {
  constexpr int kBar = 6, kGap = 4, kHeight = 120;
  const int W = stats.cluster_count * (2 * kBar + kGap) + kGap;
  RasterImage img(std::max(W, 1), kHeight, 3, 1.0);
  int peak = 1;
  for (int c = 0; c < stats.cluster_count; ++c) {
    peak = std::max({peak, stats.fg_counts[c], stats.bg_counts[c]});
  }
  auto bar = [&](int x0, int count, const double (&rgb)[3]) {
    const int h = static_cast<int>(std::lround(static_cast<double>(count) / peak * (kHeight - 10)));
    for (int y = kHeight - h; y < kHeight; ++y)
      for (int x = x0; x < x0 + kBar; ++x)
        for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = rgb[ch];
  };
  static constexpr double kRed[3] = {0.85, 0.2, 0.2}, kBlue[3] = {0.2, 0.3, 0.85};
  for (int c = 0; c < stats.cluster_count; ++c) {
    const int x0 = kGap + c * (2 * kBar + kGap);
    bar(x0, stats.fg_counts[c], kRed);
    bar(x0 + kBar, stats.bg_counts[c], kBlue);
  }
  return img;
}

namespace {

struct Shared {
  std::uint64_t seed = 42;
  fs::path out_dir = ".";
  int threads = 0;
};

struct TrainArgs {
  fs::path manifest;
  int atoms = 1024;
  int patches = 50000;
  double lambda = 0.15;
  int epochs = 10;
  int minibatch = 256;
  int patch_size = 3;
  int magnification = 3;
};

struct SeparationArgs {
  std::string class_name;
  fs::path dict_dir;
  std::optional<double> gmtl_c;
  double gmtl_c_relative = 0.1;
  int gmtl_max_iter = 200;
  double gmtl_tol = 1e-6;
  double sigma = 0.8;
  double k = 100.0 / 255.0;
  int min_size = 0;
  int band = 4;
  int window = 1;
  double epsilon = 1e-5;
};

struct SeparateArgs {
  fs::path image;
  SeparationArgs sep;
  bool baseline = false;
  double vote_lambda = 0.1;
  fs::path mask;
};

struct SuperresArgs {
  fs::path image;
  fs::path matte;
  fs::path dict;
  fs::path ground_truth;
  SeparationArgs sep;
  int magnification = 3;
  double lambda = 0.1;
  double threshold = 0.5;
  int stride = 1;
  int backprojection = 0;
};

struct EffectArgs {
  std::string name;
  fs::path image;
  fs::path matte;
  fs::path background;
  fs::path scene;
  fs::path output;
  double strength = 0.3;
  std::vector<double> center;
  std::vector<double> color{1.0, 1.0, 1.0};
  std::vector<int> offset{0, 0};
};

struct DictStatsArgs {
  fs::path fg;
  fs::path bg;
  std::string class_name;
  fs::path dict_dir;
  int clusters = 20;
};

struct RunAllArgs {
  std::vector<int> only;
};

const std::vector<std::string> kEffects = {"zoom-blur", "popup", "compose", "emboss"};

fs::path ensure_out_dir(const Shared& sh) {
  std::error_code ec;
  fs::create_directories(sh.out_dir, ec);
  if (!fs::is_directory(sh.out_dir)) {
    throw IoError("cannot create output directory " + sh.out_dir.string());
  }
  return sh.out_dir;
}

BinaryMask load_mask(const fs::path& path, const RasterImage& img, const std::string& what) {
  if (!fs::exists(path)) throw IoError(what + " not found: " + path.string());
  const RasterImage m = load_image(path);
  if (!m.same_dims(img)) {
    throw ArgumentError(what + " " + path.string() + " is " + std::to_string(m.width()) + "x" +
                        std::to_string(m.height()) + ", image is " + std::to_string(img.width()) +
                        "x" + std::to_string(img.height()));
  }
  return mask_from_image(to_luminance(m));
}

AlphaMatte load_matte(const fs::path& path) {
  AlphaMatte m;
  m.alpha = to_luminance(load_image(path));
  m.converged = true;
  return m;
}

int cmd_train(const Shared& sh, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto rows = read_manifest(a.manifest);
  if (rows.empty()) throw ArgumentError("manifest " + a.manifest.string() + " lists no images");
  if (a.patches < 1) throw ArgumentError("--patches must be >= 1");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < rows.size(); ++i) by_class[rows[i].class_name].push_back(i);

  std::vector<RasterImage> images(rows.size());
  std::vector<BinaryMask> masks(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!fs::exists(rows[i].image)) throw IoError("image not found: " + rows[i].image.string());
    images[i] = load_image(rows[i].image);
    masks[i] = load_mask(rows[i].mask, images[i], "mask");
  }

  const fs::path dir = ensure_out_dir(sh);
  TrainingConfig tc;
  tc.n_atoms = a.atoms;
  tc.patches_per_role = a.patches;
  tc.lambda = a.lambda;
  tc.epochs = a.epochs;
  tc.minibatch = a.minibatch;
  tc.patch_size = a.patch_size;
  tc.magnification = a.magnification;
  tc.rng_seed = sh.seed;

  for (const auto& [cls, members] : by_class) {
    const int per_image = (a.patches + static_cast<int>(members.size()) - 1) /
                          static_cast<int>(members.size());
    for (Role role : {Role::kForeground, Role::kBackground}) {
      std::vector<TrainingSample> samples;
      for (std::size_t i : members) {
        const std::uint64_t seed = sh.seed + 7919 * i + static_cast<std::uint64_t>(role);
        try {
          auto batch = sample_training_patches(images[i], masks[i], a.magnification, per_image,
                                               a.patch_size, role, seed);
          samples.insert(samples.end(), std::make_move_iterator(batch.begin()),
                         std::make_move_iterator(batch.end()));
        } catch (const SamplingError& e) {
          err << "warning: " << rows[i].image.string() << ": " << e.what() << '\n';
        }
      }
      if (samples.empty()) {
        throw SamplingError("class '" + cls + "' has no " + role_name(role) +
                            " training patches in " + a.manifest.string());
      }
      if (static_cast<int>(samples.size()) > a.patches) samples.resize(a.patches);
      out << "class " << cls << " " << role_name(role) << ": " << samples.size()
          << " samples\n";
      TrainingReport report;
      const CoupledDictionary d = train_coupled_dictionary(
          samples, tc, cls, role, &report, [&](const EpochReport& e) {
            out << "  epoch " << e.epoch << " objective " << e.objective << " replaced "
                << e.replaced_atoms << '\n';
          });
      const fs::path file = dictionary_path(dir, cls, role);
      save_dictionary(d, file);
      out << "  initial objective " << report.initial_objective << ", wrote " << file.string()
          << '\n';
    }
  }
  return kExitOk;
}

struct Separation {
  SegmentMap seg;
  FigureGroundMap map;
  Trimap trimap;
  AlphaMatte matte;
};

Separation separate(const RasterImage& low, const std::vector<CoupledDictionary>& dicts,
                    const SeparationArgs& a, std::ostream& out) {
  SegmentationParams sp;
  sp.smoothing_sigma = a.sigma;
  sp.threshold_k = a.k;
  sp.min_segment_size = a.min_size;
  Separation s;
  s.seg = oversegment(low, sp);

  GmtlConfig gc;
  if (a.gmtl_c) {
    gc.C = *a.gmtl_c;
  } else {
    gc.relative_C = a.gmtl_c_relative;
  }
  gc.max_iter = a.gmtl_max_iter;
  gc.tol = a.gmtl_tol;
  s.map = separate_figure_ground(low, s.seg, dicts, a.class_name, gc);
  int fg = 0;
  for (const auto& sc : s.map.segments) fg += sc.foreground;
  out << "segments " << s.seg.segment_count() << ", foreground " << fg << '\n';

  s.trimap = trimap_from_map(s.map, s.seg, a.band);
  MattingParams mp;
  mp.window_radius = a.window;
  mp.epsilon = a.epsilon;
  if (s.trimap.has(TrimapState::kForeground) && s.trimap.has(TrimapState::kBackground)) {
    s.matte = solve_matte(low, s.trimap, mp);
    out << "matte: " << s.matte.iterations << " CG iterations, residual " << s.matte.residual
        << (s.matte.converged ? "" : " (not converged)") << '\n';
  } else {
    // Nothing to refine: one label covers the whole image.
    s.matte.alpha = render_figure_ground(s.map, s.seg);
    s.matte.converged = true;
    out << "matte: single label, using the hard map\n";
  }
  return s;
}

RasterImage render_trimap(const Trimap& t) {
  RasterImage img(t.width, t.height, 1);
  for (std::size_t i = 0; i < t.state.size(); ++i) {
    img.data()[i] = t.state[i] == TrimapState::kUnknown ? 0.5 : t.value[i];
  }
  return img;
}

const fs::path& dict_dir_or(const SeparationArgs& a, const Shared& sh) {
  return a.dict_dir.empty() ? sh.out_dir : a.dict_dir;
}

int cmd_separate(const Shared& sh, const SeparateArgs& a, std::ostream& out) {
  const RasterImage low = load_image(a.image);
  const auto dicts = load_dictionaries(dict_dir_or(a.sep, sh));
  const Separation s = separate(low, dicts, a.sep, out);
  const fs::path dir = ensure_out_dir(sh);
  save_segment_labels(s.seg, dir / "segments.ssrseg");
  save_png(render_false_color(s.seg), dir / "segments.png");
  save_figure_ground_png(s.map, s.seg, dir / "figure_ground.png");
  save_figure_ground_csv(s.map, dir / "figure_ground.csv");
  save_png(render_trimap(s.trimap), dir / "trimap.png");
  save_matte_png(s.matte, dir / "matte.png");

  std::optional<BinaryMask> truth;
  if (!a.mask.empty()) {
    truth = load_mask(a.mask, low, "ground-truth mask");
    out << "accuracy gmtl " << mask_accuracy(s.map.pixel_mask(s.seg), *truth) << '\n';
  }
  if (a.baseline) {
    const FigureGroundMap vote =
        lasso_vote_baseline(low, s.seg, dicts, a.sep.class_name, a.vote_lambda);
    save_figure_ground_png(vote, s.seg, dir / "baseline_figure_ground.png");
    save_figure_ground_csv(vote, dir / "baseline_figure_ground.csv");
    if (truth) out << "accuracy vote " << mask_accuracy(vote.pixel_mask(s.seg), *truth) << '\n';
  }
  out << "wrote " << dir.string() << '\n';
  return kExitOk;
}

int cmd_superres(const Shared& sh, const SuperresArgs& a, std::ostream& out) {
  const RasterImage low = load_image(a.image);
  const fs::path dict_file = !a.dict.empty()
                                 ? a.dict
                                 : dictionary_path(dict_dir_or(a.sep, sh), a.sep.class_name,
                                                   Role::kForeground);
  if (a.dict.empty() && a.sep.class_name.empty()) {
    throw ArgumentError("superres needs --dict or --class");
  }
  if (!fs::exists(dict_file)) {
    throw IoError("foreground dictionary not found: " + dict_file.string());
  }
  const CoupledDictionary fg = load_dictionary(dict_file);

  AlphaMatte matte;
  if (!a.matte.empty()) {
    matte = load_matte(a.matte);
  } else {
    if (a.sep.class_name.empty()) throw ArgumentError("--class is needed to separate inline");
    matte = separate(low, load_dictionaries(dict_dir_or(a.sep, sh)), a.sep, out).matte;
  }

  SrConfig cfg;
  cfg.magnification = a.magnification;
  cfg.patch_size = fg.patch_size;
  cfg.lambda = a.lambda;
  cfg.threshold = a.threshold;
  cfg.stride = a.stride;
  cfg.backprojection_iterations = a.backprojection;
  const SrResult r = super_resolve_region(low, matte, fg, cfg);

  const fs::path dir = ensure_out_dir(sh);
  save_png(r.image, dir / "sr.png");
  save_png(r.bicubic, dir / "bicubic.png");
  RasterImage region(r.image.width(), r.image.height(), 1);
  for (std::size_t p = 0; p < r.region.size(); ++p) region.data()[p] = r.region[p];
  save_png(region, dir / "sr_region.png");
  out << "reconstructed " << r.patches << " patches, wrote " << (dir / "sr.png").string() << '\n';

  if (!a.ground_truth.empty()) {
    const RasterImage truth = to_channels(load_image(a.ground_truth), r.image.channels());
    if (!truth.same_dims(r.image)) {
      throw ArgumentError("ground truth " + a.ground_truth.string() + " is " +
                          std::to_string(truth.width()) + "x" + std::to_string(truth.height()) +
                          ", SR output is " + std::to_string(r.image.width()) + "x" +
                          std::to_string(r.image.height()));
    }
    out << "psnr image sr " << psnr(r.image, truth) << " bicubic " << psnr(r.bicubic, truth)
        << '\n';
    if (std::any_of(r.region.begin(), r.region.end(), [](auto v) { return v != 0; })) {
      out << "psnr region sr " << psnr(r.image, truth, &r.region) << " bicubic "
          << psnr(r.bicubic, truth, &r.region) << '\n';
    }
  }
  return kExitOk;
}

int cmd_effect(const Shared& sh, const EffectArgs& a, std::ostream& out) {
  if (std::find(kEffects.begin(), kEffects.end(), a.name) == kEffects.end()) {
    std::string names;
    for (const auto& n : kEffects) names += (names.empty() ? "" : ", ") + n;
    throw ArgumentError("unknown effect '" + a.name + "'; valid effects: " + names);
  }
  const RasterImage img = load_image(a.image);
  AlphaMatte matte = load_matte(a.matte);
  // Mattes usually come from the low-res separation; bring them to the image.
  if (!matte.alpha.same_dims(img)) {
    matte.alpha = resize_bicubic(matte.alpha, img.width(), img.height());
  }

  RasterImage result;
  if (a.name == "zoom-blur") {
    Eigen::Vector2d center((img.width() - 1) / 2.0, (img.height() - 1) / 2.0);
    if (!a.center.empty()) {
      if (a.center.size() != 2) throw ArgumentError("--center takes two values: x y");
      center = {a.center[0], a.center[1]};
    }
    result = zoom_blur(img, matte, a.strength, center);
  } else if (a.name == "popup") {
    result = a.background.empty() ? object_popup(img, matte, a.color)
                                  : object_popup(img, matte, load_image(a.background));
  } else if (a.name == "compose") {
    if (a.scene.empty()) throw ArgumentError("compose needs --scene");
    if (a.offset.size() != 2) throw ArgumentError("--offset takes two values: x y");
    result = compose(img, matte, load_image(a.scene), {a.offset[0], a.offset[1]});
  } else {
    result = emboss_background(img, matte);
  }
  const fs::path dir = ensure_out_dir(sh);
  const fs::path file = a.output.empty() ? dir / (a.name + ".png") : a.output;
  save_png(result, file);
  out << "wrote " << file.string() << '\n';
  return kExitOk;
}

int cmd_dict_stats(const Shared& sh, const DictStatsArgs& a, std::ostream& out) {
  fs::path fg_file = a.fg, bg_file = a.bg;
  if (fg_file.empty() || bg_file.empty()) {
    if (a.class_name.empty()) throw ArgumentError("dict-stats needs --fg and --bg, or --class");
    const fs::path& dir = a.dict_dir.empty() ? sh.out_dir : a.dict_dir;
    if (fg_file.empty()) fg_file = dictionary_path(dir, a.class_name, Role::kForeground);
    if (bg_file.empty()) bg_file = dictionary_path(dir, a.class_name, Role::kBackground);
  }
  for (const auto& f : {fg_file, bg_file}) {
    if (!fs::exists(f)) throw IoError("dictionary not found: " + f.string());
  }
  const DictionaryStats stats =
      dictionary_stats(load_dictionary(fg_file), load_dictionary(bg_file), a.clusters, sh.seed);
  const fs::path dir = ensure_out_dir(sh);
  save_dict_stats_csv(stats, dir / "dict_stats.csv");
  save_png(render_dict_stats(stats), dir / "dict_stats.png");
  out << "cluster fg bg\n";
  for (int c = 0; c < stats.cluster_count; ++c) {
    out << c << ' ' << stats.fg_counts[c] << ' ' << stats.bg_counts[c] << '\n';
  }
  return kExitOk;
}

int cmd_run_all(const Shared& sh, const RunAllArgs& a, std::ostream& out) {
  const fs::path dir = ensure_out_dir(sh) / "synthbench";
  const auto results = run_acceptance(dir, a.only, &out);
  bool ok = true;
  for (const auto& r : results) ok = ok && r.pass;
  out << (ok ? "all criteria passed" : "some criteria failed") << '\n';
  return ok ? kExitOk : kExitFailure;
}

void add_separation_options(CLI::App* cmd, SeparationArgs& a, bool class_required) {
  auto* cls = cmd->add_option("--class", a.class_name, "Object class of the dictionaries");
  if (class_required) cls->required();
  cmd->add_option("--dict-dir", a.dict_dir, "Directory of .ssrdict files (default: --out-dir)");
  cmd->add_option("--gmtl-c", a.gmtl_c, "Absolute l1,2 ball radius; overrides --gmtl-c-relative");
  cmd->add_option("--gmtl-c-relative", a.gmtl_c_relative, "Ball radius as a multiple of ||Y||_F")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--gmtl-max-iter", a.gmtl_max_iter, "Projected-gradient iterations")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--gmtl-tol", a.gmtl_tol, "Relative objective change to stop at");
  cmd->add_option("--seg-sigma", a.sigma, "Pre-segmentation Gaussian sigma");
  cmd->add_option("--seg-k", a.k, "Segmentation threshold constant");
  cmd->add_option("--seg-min-size", a.min_size, "Minimum segment size (0: pixels/1000)");
  cmd->add_option("--band", a.band, "Trimap unknown band half-width in pixels")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--matting-radius", a.window, "Matting window radius")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--matting-epsilon", a.epsilon, "Matting regulariser");
}

std::string shared_footer() {
  return "\nShared options (before or after the subcommand):\n"
         "  --seed UINT [42]            Seed for all randomness\n"
         "  --config TEXT               TOML-style config; flags override it\n"
         "  --out-dir TEXT [.]          Output directory\n"
         "  --threads INT [0]           OpenMP threads (0: runtime default)\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Selective super-resolution: dictionaries, figure-ground separation, matting, SR.",
               args.empty() ? "ssr" : args[0]);
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML-style config file; command-line flags take precedence");

  Shared sh;
  app.add_option("--seed", sh.seed, "Seed for all randomness");
  app.add_option("--out-dir", sh.out_dir, "Output directory");
  app.add_option("--threads", sh.threads, "OpenMP threads (0: runtime default)")
      ->check(CLI::NonNegativeNumber);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train fg/bg coupled dictionaries per class");
  train->add_option("--manifest", ta.manifest, "Lines of image<TAB>mask<TAB>class")->required();
  train->add_option("--atoms", ta.atoms, "Atoms per dictionary")->check(CLI::PositiveNumber);
  train->add_option("--patches", ta.patches, "Training patches per role and class")
      ->check(CLI::PositiveNumber);
  train->add_option("--lambda", ta.lambda, "Sparse-coding weight");
  train->add_option("--epochs", ta.epochs, "Passes over the samples")->check(CLI::PositiveNumber);
  train->add_option("--minibatch", ta.minibatch, "Minibatch size")->check(CLI::PositiveNumber);
  train->add_option("--patch-size", ta.patch_size, "Low-res patch side");
  train->add_option("--magnification", ta.magnification, "Upscaling factor");

  SeparateArgs sa;
  auto* sep = app.add_subcommand("separate", "Figure-ground separation and matting of a low-res image");
  sep->add_option("--image", sa.image, "Input image")->required()->check(CLI::ExistingFile);
  add_separation_options(sep, sa.sep, true);
  sep->add_flag("--baseline", sa.baseline, "Also run the Lasso voting baseline");
  sep->add_option("--vote-lambda", sa.vote_lambda, "Lasso weight of the baseline");
  sep->add_option("--mask", sa.mask, "Ground-truth mask; prints pixel accuracy")
      ->check(CLI::ExistingFile);

  SuperresArgs ra;
  auto* sr = app.add_subcommand("superres", "Super-resolve the matted object region");
  sr->add_option("--image", ra.image, "Low-res input image")->required()->check(CLI::ExistingFile);
  sr->add_option("--matte", ra.matte, "Alpha matte PNG (default: separate inline)")
      ->check(CLI::ExistingFile);
  sr->add_option("--dict", ra.dict, "Foreground dictionary (default: <dict-dir>/<class>_fg.ssrdict)");
  add_separation_options(sr, ra.sep, false);
  sr->add_option("--magnification", ra.magnification, "Upscaling factor; must match the dictionary");
  sr->add_option("--lambda", ra.lambda, "Sparse-coding weight")->check(CLI::PositiveNumber);
  sr->add_option("--threshold", ra.threshold, "Alpha threshold of the SR region");
  sr->add_option("--stride", ra.stride, "Patch stride in low-res pixels");
  sr->add_option("--backprojection", ra.backprojection, "Backprojection iterations");
  sr->add_option("--ground-truth", ra.ground_truth, "High-res reference; prints PSNR")
      ->check(CLI::ExistingFile);

  EffectArgs ea;
  auto* eff = app.add_subcommand("effect", "Apply a matte-driven visual effect");
  eff->add_option("--name", ea.name, "zoom-blur, popup, compose or emboss")->required();
  eff->add_option("--image", ea.image, "Input image")->required()->check(CLI::ExistingFile);
  eff->add_option("--matte", ea.matte, "Alpha matte PNG")->required()->check(CLI::ExistingFile);
  eff->add_option("--strength", ea.strength, "Zoom-blur strength");
  eff->add_option("--center", ea.center, "Zoom centre x y (default: image centre)")->expected(2);
  eff->add_option("--color", ea.color, "Pop-up background colour")->expected(1, 3);
  eff->add_option("--background", ea.background, "Pop-up background image")
      ->check(CLI::ExistingFile);
  eff->add_option("--scene", ea.scene, "Scene image for compose")->check(CLI::ExistingFile);
  eff->add_option("--offset", ea.offset, "Compose offset x y")->expected(2);
  eff->add_option("--output", ea.output, "Output PNG (default: <out-dir>/<name>.png)");

  DictStatsArgs da;
  auto* ds = app.add_subcommand("dict-stats", "Cluster fg/bg atoms and count members per cluster");
  ds->add_option("--fg", da.fg, "Foreground dictionary file");
  ds->add_option("--bg", da.bg, "Background dictionary file");
  ds->add_option("--class", da.class_name, "Class, to find <class>_{fg,bg}.ssrdict");
  ds->add_option("--dict-dir", da.dict_dir, "Directory of .ssrdict files (default: --out-dir)");
  ds->add_option("--clusters", da.clusters, "k-means clusters")->check(CLI::PositiveNumber);

  RunAllArgs aa;
  auto* bench = app.add_subcommand("synthbench", "Synthetic oracle harness");
  bench->require_subcommand(1);
  auto* run_all = bench->add_subcommand("run-all", "Run every acceptance check and print PASS/FAIL");
  run_all->add_option("--only", aa.only, "Criterion numbers to run (default: all)");

  for (auto* cmd : {train, sep, sr, eff, ds, bench, run_all}) cmd->footer(shared_footer());

  std::vector<const char*> argv;
  std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"ssr"} : args;
  for (const auto& s : storage) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

#ifdef _OPENMP
  if (sh.threads > 0) omp_set_num_threads(sh.threads);
#endif

  try {
    if (train->parsed()) return cmd_train(sh, ta, out, err);
    if (sep->parsed()) return cmd_separate(sh, sa, out);
    if (sr->parsed()) return cmd_superres(sh, ra, out);
    if (eff->parsed()) return cmd_effect(sh, ea, out);
    if (ds->parsed()) return cmd_dict_stats(sh, da, out);
    if (run_all->parsed()) return cmd_run_all(sh, aa, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ssr::cli
