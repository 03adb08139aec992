#include "ssr/figure_ground.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace ssr {

BinaryMask FigureGroundMap::pixel_mask(const SegmentMap& seg) const {
  if (seg.segment_count() != segment_count() || seg.width() != width || seg.height() != height) {
    throw ArgumentError("figure-ground map does not match the segment map");
  }
  BinaryMask mask(seg.labels().size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = segments[seg.labels()[i]].foreground;
  return mask;
}

ConcatenatedDictionary concatenate_dictionaries(const std::vector<CoupledDictionary>& dicts,
                                                const std::string& class_name) {
  bool has_fg = false, has_bg = false;
  for (const auto& d : dicts) {
    if (d.class_name != class_name) continue;
    (d.role == Role::kForeground ? has_fg : has_bg) = true;
  }
  for (auto [present, role] : {std::pair{has_fg, "fg"}, std::pair{has_bg, "bg"}}) {
    if (!present) {
      throw ArgumentError("missing dictionary for (" + class_name + ", " + role + ")");
    }
  }
  ConcatenatedDictionary out;
  const CoupledDictionary& first = dicts.front();
  out.patch_size = first.patch_size;
  out.magnification = first.magnification;
  int total = 0;
  for (const auto& d : dicts) {
    if (d.p_low() != first.p_low() || d.patch_size != first.patch_size ||
        d.magnification != first.magnification) {
      throw ArgumentError("dictionaries disagree on feature dimension, patch size or magnification");
    }
    total += d.atoms();
  }
  out.d.resize(first.p_low(), total);
  int col = 0;
  for (const auto& d : dicts) {
    out.d.middleCols(col, d.atoms()) = d.d_low;
    out.groups.append(d.atoms(), {d.class_name, d.role});
    col += d.atoms();
  }
  return out;
}

std::vector<Eigen::MatrixXd> segment_tasks(const RasterImage& low, const SegmentMap& seg,
                                           int patch_size, int magnification,
                                           const PatchConfig& patch) {
  if (seg.width() != low.width() || seg.height() != low.height()) {
    throw ArgumentError("segment map is " + std::to_string(seg.width()) + "x" +
                        std::to_string(seg.height()) + " but the image is " +
                        std::to_string(low.width()) + "x" + std::to_string(low.height()));
  }
  if (patch.stride < 1 || patch.max_tasks < 1) {
    throw ArgumentError("patch stride and max_tasks must be >= 1");
  }
  const int G = seg.segment_count();
  std::vector<std::vector<Eigen::Vector2i>> members(G);
  if (low.width() >= patch_size && low.height() >= patch_size) {
    const PatchGrid grid = PatchGrid::dense(low.width(), low.height(), patch_size, patch.stride);
    const double need = patch.min_inside * patch_size * patch_size;
    std::vector<int> count(G, 0);
    std::vector<int> touched;
    for (const auto& o : grid.origins) {
      touched.clear();
      for (int dy = 0; dy < patch_size; ++dy)
        for (int dx = 0; dx < patch_size; ++dx) {
          const int g = seg.label(o.x() + dx, o.y() + dy);
          if (count[g]++ == 0) touched.push_back(g);
        }
      for (int g : touched) {
        if (count[g] >= need) members[g].push_back(o);
        count[g] = 0;
      }
    }
  }

  const RasterImage base = upsample_bicubic(to_luminance(low), magnification);
  const FeatureMaps maps = feature_maps(base);
  const int footprint = patch_size * magnification;
  std::vector<Eigen::MatrixXd> tasks(G);
  for (int g = 0; g < G; ++g) {
    const auto& m = members[g];
    const int K = std::min<int>(static_cast<int>(m.size()), patch.max_tasks);
    tasks[g].resize(4 * footprint * footprint, K);
    for (int k = 0; k < K; ++k) {
      const std::size_t i = static_cast<std::size_t>(k) * m.size() / K;
      tasks[g].col(k) = patch_features(maps, m[i].x() * magnification, m[i].y() * magnification,
                                       footprint);
      const double norm = tasks[g].col(k).norm();
      if (patch.normalize && norm > 0.0) tasks[g].col(k) /= norm;
    }
  }
  return tasks;
}

namespace {

// Segments without patches take the label of the classified neighbour with
// the closest mean colour, spreading outward until every segment is set.
void inherit_labels(FigureGroundMap& map, const RasterImage& low, const SegmentMap& seg) {
  const auto adjacency = segment_adjacency(seg);
  const auto means = segment_means(seg, low);
  std::vector<char> known(map.segment_count());
  bool any = false;
  for (int g = 0; g < map.segment_count(); ++g) any |= (known[g] = map.patch_counts[g] > 0);
  if (!any) return;
  bool progress = true;
  while (progress) {
    progress = false;
    std::vector<char> next = known;
    for (int g = 0; g < map.segment_count(); ++g) {
      if (known[g]) continue;
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int h : adjacency[g]) {
        if (!known[h]) continue;
        const double d = (means[g] - means[h]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = h;
        }
      }
      if (best < 0) continue;
      map.segments[g].foreground = map.segments[best].foreground;
      next[g] = 1;
      progress = true;
    }
    known = std::move(next);
  }
}

FigureGroundMap empty_map(const SegmentMap& seg) {
  FigureGroundMap map;
  map.width = seg.width();
  map.height = seg.height();
  map.segments.resize(seg.segment_count());
  map.patch_counts.assign(seg.segment_count(), 0);
  return map;
}

double class_sum(const Eigen::VectorXd& a, const GroupIndex& groups, const std::string& cls,
                 Role role) {
  double s = 0.0;
  for (int g = 0; g < groups.group_count(); ++g) {
    if (groups.tag(g).class_name != cls || groups.tag(g).role != role) continue;
    for (int i : groups.group(g)) s += std::abs(a(i));
  }
  return s;
}

}  // namespace

FigureGroundMap separate_figure_ground(const RasterImage& low, const SegmentMap& seg,
                                       const std::vector<CoupledDictionary>& dicts,
                                       const std::string& class_name, const GmtlConfig& cfg,
                                       const PatchConfig& patch) {
  const ConcatenatedDictionary cat = concatenate_dictionaries(dicts, class_name);
  const auto tasks = segment_tasks(low, seg, cat.patch_size, cat.magnification, patch);
  if (!tasks.empty() && tasks.front().rows() != cat.d.rows()) {
    throw ArgumentError("dictionary feature dimension does not match the patch configuration");
  }
  const GmtlSolver solver(cat.d, cat.groups);
  FigureGroundMap map = empty_map(seg);
#pragma omp parallel for schedule(dynamic, 1)
  for (int g = 0; g < map.segment_count(); ++g) {
    if (tasks[g].cols() == 0) continue;
    const CoefficientMatrix omega = solver.solve({tasks[g], g}, cfg);
    map.segments[g] = classify_segment(omega, cat.groups, class_name);
    map.patch_counts[g] = static_cast<int>(tasks[g].cols());
  }
  inherit_labels(map, low, seg);
  return map;
}

SegmentScore vote_segment(const Eigen::MatrixXd& tasks, const ConcatenatedDictionary& cat,
                          const std::string& class_name, double lambda) {
  const LassoSolver solver(cat.d);
  SegmentScore score;
  const Eigen::Index K = tasks.cols();
  if (K == 0) return score;
  int fg_votes = 0, bg_votes = 0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const SparseCode code = solver.solve(tasks.col(k), {lambda, 1e-6, 1000});
    const double fg = class_sum(code.coefficients, cat.groups, class_name, Role::kForeground);
    const double bg = class_sum(code.coefficients, cat.groups, class_name, Role::kBackground);
    (fg > bg ? fg_votes : bg_votes)++;
  }
  score.fg_score = static_cast<double>(fg_votes) / K;
  score.bg_score = static_cast<double>(bg_votes) / K;
  score.foreground = fg_votes > bg_votes;
  return score;
}

FigureGroundMap lasso_vote_baseline(const RasterImage& low, const SegmentMap& seg,
                                    const std::vector<CoupledDictionary>& dicts,
                                    const std::string& class_name, double lambda,
                                    const PatchConfig& patch) {
  const ConcatenatedDictionary cat = concatenate_dictionaries(dicts, class_name);
  const auto tasks = segment_tasks(low, seg, cat.patch_size, cat.magnification, patch);
  FigureGroundMap map = empty_map(seg);
#pragma omp parallel for schedule(dynamic, 1)
  for (int g = 0; g < map.segment_count(); ++g) {
    if (tasks[g].cols() == 0) continue;
    map.segments[g] = vote_segment(tasks[g], cat, class_name, lambda);
    map.patch_counts[g] = static_cast<int>(tasks[g].cols());
  }
  inherit_labels(map, low, seg);
  return map;
}

RasterImage render_figure_ground(const FigureGroundMap& map, const SegmentMap& seg) {
  const BinaryMask mask = map.pixel_mask(seg);
  RasterImage out(seg.width(), seg.height(), 1);
  for (std::size_t i = 0; i < mask.size(); ++i) out.data()[i] = mask[i] ? 1.0 : 0.0;
  return out;
}

void save_figure_ground_png(const FigureGroundMap& map, const SegmentMap& seg,
                            const std::filesystem::path& path) {
  save_png(render_figure_ground(map, seg), path);
}

void save_figure_ground_csv(const FigureGroundMap& map, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.precision(17);
  f << "segment_id,fg_score,bg_score,label\n";
  for (int g = 0; g < map.segment_count(); ++g) {
    const auto& s = map.segments[g];
    f << g << ',' << s.fg_score << ',' << s.bg_score << ',' << (s.foreground ? "fg" : "bg") << '\n';
  }
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace ssr
