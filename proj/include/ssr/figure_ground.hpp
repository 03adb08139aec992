#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssr/dictlearn.hpp"
#include "ssr/gmtl.hpp"
#include "ssr/image.hpp"
#include "ssr/segmentation.hpp"

namespace ssr {

struct PatchConfig {
  int stride = 1;
  // A low-res patch joins a segment when at least this fraction of its
  // pixels lies inside it.
  double min_inside = 0.5;
  // Larger segments are subsampled evenly to this many tasks.
  int max_tasks = 256;
  // Scale every feature vector to unit l2 norm (zero vectors stay zero).
  bool normalize = true;
};

struct FigureGroundMap {
  int width = 0;
  int height = 0;
  std::vector<SegmentScore> segments;
  // Patches that went into each segment's decision; 0 means the label was
  // inherited from a neighbour.
  std::vector<int> patch_counts;

  int segment_count() const { return static_cast<int>(segments.size()); }
  BinaryMask pixel_mask(const SegmentMap& seg) const;
};

// Concatenated D_low blocks and their group index, in dictionary order.
struct ConcatenatedDictionary {
  DictionaryMatrix d;
  GroupIndex groups;
  int patch_size = 3;
  int magnification = 3;
};

// Requires (class_name, fg) and (class_name, bg) among the dictionaries and
// consistent feature dimensions.
ConcatenatedDictionary concatenate_dictionaries(const std::vector<CoupledDictionary>& dicts,
                                                const std::string& class_name);

// Feature vectors of the low-res image's patches per segment. Features are
// taken on the bicubic upsampling by the dictionaries' magnification.
std::vector<Eigen::MatrixXd> segment_tasks(const RasterImage& low, const SegmentMap& seg,
                                           int patch_size, int magnification,
                                           const PatchConfig& patch);

// Solver settings used for separation unless the caller overrides them. The
// ball radius follows the data (tasks are unit vectors, so ||Y||_F = sqrt(K)).
inline GmtlConfig separation_gmtl_config() {
  GmtlConfig cfg;
  cfg.relative_C = 0.1;
  return cfg;
}

// GMTL per segment of the low-res image, then the coefficient-sum decision.
FigureGroundMap separate_figure_ground(const RasterImage& low, const SegmentMap& seg,
                                       const std::vector<CoupledDictionary>& dicts,
                                       const std::string& class_name,
                                       const GmtlConfig& cfg = separation_gmtl_config(),
                                       const PatchConfig& patch = {});

// Majority vote of per-task Lasso codes; ties go to background. Scores are
// vote fractions.
SegmentScore vote_segment(const Eigen::MatrixXd& tasks, const ConcatenatedDictionary& cat,
                          const std::string& class_name, double lambda);

// Patch-wise Lasso with a per-segment majority vote. Scores are vote fractions.
FigureGroundMap lasso_vote_baseline(const RasterImage& low, const SegmentMap& seg,
                                    const std::vector<CoupledDictionary>& dicts,
                                    const std::string& class_name, double lambda = 0.1,
                                    const PatchConfig& patch = {});

RasterImage render_figure_ground(const FigureGroundMap& map, const SegmentMap& seg);
void save_figure_ground_png(const FigureGroundMap& map, const SegmentMap& seg,
                            const std::filesystem::path& path);
void save_figure_ground_csv(const FigureGroundMap& map, const std::filesystem::path& path);

}  // namespace ssr
