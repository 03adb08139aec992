#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssr/image.hpp"
#include "ssr/sparse.hpp"

namespace ssr {

// Paired atoms for one (class, role). D_low has unit columns; D_high is
// scaled by the same per-atom factor, so D_high * a reconstructs the high
// patch of a feature vector coded as a against D_low.
struct CoupledDictionary {
  static constexpr std::uint32_t kVersion = 1;

  std::string class_name;
  Role role = Role::kForeground;
  DictionaryMatrix d_low;
  Eigen::MatrixXd d_high;
  // Weight s on the squared high-block error during training; the joint
  // atom is [sqrt(s) * high; low].
  double scaling = 1.0;
  int patch_size = 3;
  int magnification = 3;

  int atoms() const { return static_cast<int>(d_low.cols()); }
  int p_low() const { return static_cast<int>(d_low.rows()); }
  int p_high() const { return static_cast<int>(d_high.rows()); }

  friend bool operator==(const CoupledDictionary&, const CoupledDictionary&) = default;
};

// Unit-norm joint atoms [sqrt(s) * high; low] recovered from the stored blocks.
Eigen::MatrixXd joint_atoms(const CoupledDictionary& d);

struct TrainingConfig {
  int n_atoms = 1024;
  int patches_per_role = 50000;
  double lambda = 0.15;
  int epochs = 10;
  int minibatch = 256;
  std::uint64_t rng_seed = 42;
  int patch_size = 3;
  int magnification = 3;
  double lasso_tol = 1e-6;
  int lasso_max_iter = 1000;
};

struct EpochReport {
  int epoch = 0;
  // Mean of 0.5||z - D a||^2 + lambda ||a||_1 over the holdout (or the
  // training set when there is no holdout), with fresh codes.
  double objective = 0.0;
  int replaced_atoms = 0;
};

struct TrainingReport {
  double initial_objective = 0.0;
  std::vector<EpochReport> epochs;
  bool has_holdout = false;
};

using EpochCallback = std::function<void(const EpochReport&)>;

// Online dictionary learning on joint vectors z = [sqrt(s) h; f] with
// s = p_low / p_high. Per-sample codes are kept between epochs so the
// sufficient statistics stay exact.
CoupledDictionary train_coupled_dictionary(const std::vector<TrainingSample>& samples,
                                           const TrainingConfig& cfg,
                                           const std::string& class_name = "",
                                           Role role = Role::kForeground,
                                           TrainingReport* report = nullptr,
                                           const EpochCallback& on_epoch = {});

// Joint data matrix of the samples for the given scaling.
Eigen::MatrixXd joint_samples(const std::vector<TrainingSample>& samples, double scaling);

// Mean sparse-coding objective of the columns of Z against D.
double coding_objective(const Eigen::MatrixXd& Z, const DictionaryMatrix& d, double lambda,
                        double tol = 1e-6, int max_iter = 1000);

struct DictionaryStats {
  int cluster_count = 0;
  std::vector<int> fg_counts;
  std::vector<int> bg_counts;
  // Cluster of each atom: fg atoms first, then bg atoms.
  std::vector<int> assignment;
};

// k-means (k-means++ seeding, 100 Lloyd iterations) over the union of the
// D_low atoms.
DictionaryStats dictionary_stats(const CoupledDictionary& fg, const CoupledDictionary& bg,
                                 int clusters = 20, std::uint64_t rng_seed = 42);

std::vector<int> kmeans(const Eigen::MatrixXd& points, int clusters, std::uint64_t rng_seed,
                        int iterations = 100);

void save_dictionary(const CoupledDictionary& d, const std::filesystem::path& path);
CoupledDictionary load_dictionary(const std::filesystem::path& path);

}  // namespace ssr
