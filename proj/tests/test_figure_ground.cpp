#include <algorithm>
#include <fstream>
#include <string>

#include "doctest.h"
#include "ssr/figure_ground.hpp"
#include "ssr/synthbench.hpp"
#include "ssr/random.hpp"
#include "test_util.hpp"

using namespace ssr;

namespace {

struct Fixture {
  std::vector<PatchAtom> fg_atoms = make_stripe_atoms(32, 8, true, 3, 8, 1);
  std::vector<PatchAtom> bg_atoms = make_stripe_atoms(32, 8, false, 3, 8, 2);
  std::vector<CoupledDictionary> dicts;

  Fixture() {
    PlantedTrainingConfig cfg;
    cfg.training.n_atoms = 32;
    cfg.training.epochs = 5;
    const PlantedDictionaries d = train_planted_dictionaries(fg_atoms, bg_atoms, "obj", cfg, 5);
    dicts = {d.fg, d.bg};
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

// Segments taken straight from the ground-truth mask.
SegmentMap mask_segments(const PlantedScene& scene) {
  std::vector<int> labels(scene.mask.begin(), scene.mask.end());
  return SegmentMap(scene.image.width(), scene.image.height(), labels);
}

}  // namespace

TEST_CASE("two planted halves are separated correctly by both methods") {
  const Fixture& f = fixture();
  const PlantedScene scene = make_planted_scene(f.fg_atoms, f.bg_atoms, half_split_layout(48, 48), 0.01, 3);
  const SegmentMap seg = mask_segments(scene);
  REQUIRE(seg.segment_count() == 2);

  const FigureGroundMap gmtl = separate_figure_ground(scene.image, seg, f.dicts, "obj");
  const FigureGroundMap vote = lasso_vote_baseline(scene.image, seg, f.dicts, "obj");
  const double acc_gmtl = mask_accuracy(gmtl.pixel_mask(seg), scene.mask);
  const double acc_vote = mask_accuracy(vote.pixel_mask(seg), scene.mask);
  CHECK(acc_gmtl == 1.0);
  CHECK(acc_gmtl >= acc_vote);
  for (int g = 0; g < 2; ++g) {
    CHECK(gmtl.patch_counts[g] > 0);
    CHECK(gmtl.segments[g].foreground == (gmtl.segments[g].fg_score > gmtl.segments[g].bg_score));
  }
}

TEST_CASE("a single segment gets one label") {
  const Fixture& f = fixture();
  SceneLayout layout;
  layout.width = layout.height = 32;
  layout.foreground = {{0, 0, 32, 32}};
  const PlantedScene scene = make_planted_scene(f.fg_atoms, f.bg_atoms, layout, 0.01, 4);
  const SegmentMap seg(32, 32, std::vector<int>(32 * 32, 0));
  const FigureGroundMap map = separate_figure_ground(scene.image, seg, f.dicts, "obj");
  REQUIRE(map.segment_count() == 1);
  CHECK(map.segments[0].foreground);
  const BinaryMask mask = map.pixel_mask(seg);
  CHECK(std::all_of(mask.begin(), mask.end(), [](std::uint8_t v) { return v == 1; }));
}

TEST_CASE("voting on planted tasks") {
  const ConcatenatedDictionary cat = concatenate_dictionaries(fixture().dicts, "obj");
  Rng rng(11);
  // Sparse combinations of foreground atoms only.
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(cat.d.rows(), 12);
  for (int k = 0; k < 12; ++k) {
    for (int j = 0; j < 2; ++j) Y.col(k) += rng.uniform(0.5, 1.0) * cat.d.col(rng.index(32));
  }
  const SegmentScore fg = vote_segment(Y, cat, "obj", 0.1);
  CHECK(fg.fg_score == 1.0);
  CHECK(fg.foreground);

  // One task per role splits the vote; the tie goes to background.
  Eigen::MatrixXd split(cat.d.rows(), 2);
  split.col(0) = cat.d.col(3);
  split.col(1) = cat.d.col(32 + 3);
  const SegmentScore tie = vote_segment(split, cat, "obj", 0.1);
  CHECK(tie.fg_score == 0.5);
  CHECK(tie.bg_score == 0.5);
  CHECK_FALSE(tie.foreground);
}

TEST_CASE("zero image is all background") {
  const Fixture& f = fixture();
  const RasterImage zero(24, 24, 1);
  std::vector<int> labels(24 * 24);
  for (int i = 0; i < 24 * 24; ++i) labels[i] = (i % 24) < 12;
  const SegmentMap seg(24, 24, labels);
  for (const FigureGroundMap& map : {lasso_vote_baseline(zero, seg, f.dicts, "obj"),
                                     separate_figure_ground(zero, seg, f.dicts, "obj")}) {
    for (const auto& s : map.segments) CHECK_FALSE(s.foreground);
  }
}

TEST_CASE("segments without patches inherit from the closest neighbour") {
  const Fixture& f = fixture();
  const PlantedScene scene = make_planted_scene(f.fg_atoms, f.bg_atoms, half_split_layout(48, 48), 0.01, 6);
  // Split off a one-pixel column from each half; no 3x3 patch is mostly inside it.
  std::vector<int> labels(48 * 48);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      const int half = scene.mask[y * 48 + x];
      labels[y * 48 + x] = (x == 0 || x == 47) ? 2 + half : half;
    }
  }
  const SegmentMap seg(48, 48, labels);
  REQUIRE(seg.segment_count() == 4);
  const FigureGroundMap map = separate_figure_ground(scene.image, seg, f.dicts, "obj");
  int inherited = 0;
  for (int g = 0; g < 4; ++g) inherited += map.patch_counts[g] == 0;
  CHECK(inherited == 2);
  CHECK(mask_accuracy(map.pixel_mask(seg), scene.mask) == 1.0);
}

TEST_CASE("segment tasks") {
  const RasterImage img = ssr::testing::random_image(20, 16, 1, 1);
  std::vector<int> labels(20 * 16);
  for (int i = 0; i < 20 * 16; ++i) labels[i] = (i % 20) < 10;
  const SegmentMap seg(20, 16, labels);
  PatchConfig patch;
  const auto tasks = segment_tasks(img, seg, 3, 2, patch);
  REQUIRE(tasks.size() == 2);
  // Origins x in [0, 17]; a patch belongs to a side when 2 of its 3 columns do.
  CHECK(tasks[0].cols() == 9 * 14);
  CHECK(tasks[1].cols() == 9 * 14);
  CHECK(tasks[0].rows() == 4 * 6 * 6);
  for (Eigen::Index k = 0; k < tasks[0].cols(); ++k) {
    CHECK(tasks[0].col(k).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  patch.max_tasks = 10;
  CHECK(segment_tasks(img, seg, 3, 2, patch)[1].cols() == 10);
  patch.stride = 0;
  CHECK_THROWS_AS(segment_tasks(img, seg, 3, 2, patch), ArgumentError);
  CHECK_THROWS_AS(segment_tasks(img, SegmentMap(4, 4, std::vector<int>(16, 0)), 3, 2, {}),
                  ArgumentError);
}

TEST_CASE("missing or inconsistent dictionaries") {
  const Fixture& f = fixture();
  const RasterImage img(16, 16, 1);
  const SegmentMap seg(16, 16, std::vector<int>(256, 0));
  try {
    separate_figure_ground(img, seg, {f.dicts[0]}, "obj");
    FAIL("expected an argument error");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("(obj, bg)") != std::string::npos);
  }
  CHECK_THROWS_AS(lasso_vote_baseline(img, seg, {f.dicts[1]}, "obj"), ArgumentError);
  CHECK_THROWS_AS(separate_figure_ground(img, seg, f.dicts, "dog"), ArgumentError);
  auto bad = f.dicts;
  bad[1].patch_size = 5;
  CHECK_THROWS_AS(concatenate_dictionaries(bad, "obj"), ArgumentError);

  const ConcatenatedDictionary cat = concatenate_dictionaries(f.dicts, "obj");
  CHECK(cat.d.cols() == 64);
  CHECK(cat.groups.group_count() == 2);
  CHECK(cat.groups.tag(1).role == Role::kBackground);
}

TEST_CASE("figure-ground export") {
  ssr::testing::TempDir dir("fg");
  std::vector<int> labels(6 * 4);
  for (int i = 0; i < 24; ++i) labels[i] = (i % 6) >= 3;
  const SegmentMap seg(6, 4, labels);
  FigureGroundMap map;
  map.width = 6;
  map.height = 4;
  map.segments = {{0.25, 0.5, false}, {0.75, 0.125, true}};
  map.patch_counts = {1, 1};

  save_figure_ground_csv(map, dir / "map.csv");
  std::ifstream in(dir / "map.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "segment_id,fg_score,bg_score,label");
  std::getline(in, line);
  CHECK(line == "0,0.25,0.5,bg");
  std::getline(in, line);
  CHECK(line == "1,0.75,0.125,fg");

  save_figure_ground_png(map, seg, dir / "map.png");
  const RasterImage back = load_image(dir / "map.png");
  REQUIRE(back.width() == 6);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 6; ++x) CHECK(back.at(x, y) == (x >= 3 ? 1.0 : 0.0));
  }
  CHECK_THROWS_AS(map.pixel_mask(SegmentMap(6, 4, std::vector<int>(24, 0))), ArgumentError);
}
