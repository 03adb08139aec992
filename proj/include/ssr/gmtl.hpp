#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssr/image.hpp"
#include "ssr/sparse.hpp"

namespace ssr {

struct GroupTag {
  std::string class_name;
  Role role = Role::kForeground;
  friend bool operator==(const GroupTag&, const GroupTag&) = default;
};

// Disjoint atom index sets covering 0..n-1, each tagged with the
// (class, role) of the dictionary it came from.
class GroupIndex {
 public:
  GroupIndex() = default;
  GroupIndex(std::vector<std::vector<int>> groups, std::vector<GroupTag> tags);

  // Appends a group of `size` consecutive indices.
  void append(int size, GroupTag tag);

  int group_count() const { return static_cast<int>(groups_.size()); }
  int total_size() const { return total_; }
  const std::vector<int>& group(int g) const { return groups_[g]; }
  const GroupTag& tag(int g) const { return tags_[g]; }
  double mean_group_size() const {
    return groups_.empty() ? 0.0 : static_cast<double>(total_) / groups_.size();
  }

 private:
  std::vector<std::vector<int>> groups_;
  std::vector<GroupTag> tags_;
  int total_ = 0;
};

// Sum over groups of the within-group l2 norm. For matrices the group
// selects rows and the Frobenius norm of the row block is used.
double l12_norm(const Eigen::VectorXd& x, const GroupIndex& groups);
double l12_norm(const Eigen::MatrixXd& omega, const GroupIndex& groups);

// Euclidean projection onto {x : l12_norm(x) <= tau} by sorting group norms.
Eigen::VectorXd project_l12_ball(const Eigen::VectorXd& x, const GroupIndex& groups,
                                 double tau);
// In-place projection of the row blocks of omega (vectorised per group).
void project_l12_ball(Eigen::MatrixXd& omega, const GroupIndex& groups, double tau);

// Shrinkage threshold of the projection for the given group norms; 0 when
// the norms are already inside the ball.
double l12_threshold(std::vector<double> norms, double tau);

// Columns of Y are the feature vectors of one segment's patches.
struct TaskBatch {
  Eigen::MatrixXd Y;
  int segment_id = -1;
  int tasks() const { return static_cast<int>(Y.cols()); }
};

struct GmtlConfig {
  // Ball radius; unset selects relative_C * ||Y||_F, or default_ball_radius
  // when that is unset too.
  std::optional<double> C;
  std::optional<double> relative_C;
  // Step size; unset selects 0.9 / sigma_max(D^T D).
  std::optional<double> eta;
  int max_iter = 200;
  double tol = 1e-6;
};

struct CoefficientMatrix {
  Eigen::MatrixXd omega;
  bool converged = false;
  int iterations = 0;
  // sum_k ||y_k - D w_k||^2, including the constant ||Y||^2 term.
  double objective = 0.0;
  // objective before the first step followed by one entry per iteration.
  std::vector<double> objective_history;
};

double default_ball_radius(int tasks, const GroupIndex& groups);

// Largest eigenvalue of D^T D by power iteration.
double spectral_norm_gram(const DictionaryMatrix& d, int iterations = 50);

double gmtl_objective(const Eigen::MatrixXd& Y, const DictionaryMatrix& d,
                      const Eigen::MatrixXd& omega);

// Projected gradient for min ||Y - D Omega||_F^2 s.t. l12_norm(Omega) <= C.
class GmtlSolver {
 public:
  GmtlSolver(DictionaryMatrix dictionary, GroupIndex groups);

  const DictionaryMatrix& dictionary() const { return dict_; }
  const GroupIndex& groups() const { return groups_; }
  double sigma_max() const { return sigma_max_; }

  CoefficientMatrix solve(const TaskBatch& batch, const GmtlConfig& cfg) const;

 private:
  DictionaryMatrix dict_;
  GroupIndex groups_;
  double sigma_max_ = 0.0;
};

CoefficientMatrix gmtl_solve(const TaskBatch& batch, const DictionaryMatrix& d,
                             const GroupIndex& groups, const GmtlConfig& cfg);

struct SegmentScore {
  double fg_score = 0.0;
  double bg_score = 0.0;
  bool foreground = false;
};

// Score = sum of |coefficients| in the class's fg (resp. bg) groups over K.
// Ties go to background.
SegmentScore classify_segment(const Eigen::MatrixXd& omega, const GroupIndex& groups,
                              const std::string& class_name);
inline SegmentScore classify_segment(const CoefficientMatrix& c, const GroupIndex& groups,
                                     const std::string& class_name) {
  return classify_segment(c.omega, groups, class_name);
}

}  // namespace ssr
