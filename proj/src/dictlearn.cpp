#include "ssr/dictlearn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "ssr/random.hpp"

namespace ssr {

Eigen::MatrixXd joint_atoms(const CoupledDictionary& d) {
  Eigen::MatrixXd joint(d.p_high() + d.p_low(), d.atoms());
  joint.topRows(d.p_high()) = std::sqrt(d.scaling) * d.d_high;
  joint.bottomRows(d.p_low()) = d.d_low;
  normalize_columns(joint);
  return joint;
}

Eigen::MatrixXd joint_samples(const std::vector<TrainingSample>& samples, double scaling) {
  if (samples.empty()) return {};
  const Eigen::Index ph = samples.front().high_patch.size();
  const Eigen::Index pl = samples.front().features.size();
  Eigen::MatrixXd z(ph + pl, static_cast<Eigen::Index>(samples.size()));
  const double w = std::sqrt(scaling);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].high_patch.size() != ph || samples[i].features.size() != pl) {
      throw ArgumentError("train: sample " + std::to_string(i) + " has inconsistent dimensions");
    }
    z.col(static_cast<Eigen::Index>(i)) << w * samples[i].high_patch, samples[i].features;
  }
  return z;
}

double coding_objective(const Eigen::MatrixXd& Z, const DictionaryMatrix& d, double lambda,
                        double tol, int max_iter) {
  if (Z.cols() == 0) return 0.0;
  const LassoSolver solver(d);
  const Eigen::Index m = Z.cols();
  std::vector<double> values(m);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < m; ++i) {
    values[i] = solver.solve(Z.col(i), {lambda, tol, max_iter}).objective_value;
  }
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(m);
}

namespace {

struct SparseCoef {
  std::vector<int> index;
  std::vector<double> value;
};

SparseCoef to_sparse(const Eigen::VectorXd& a) {
  SparseCoef s;
  for (Eigen::Index j = 0; j < a.size(); ++j)
    if (a(j) != 0.0) {
      s.index.push_back(static_cast<int>(j));
      s.value.push_back(a(j));
    }
  return s;
}

// A += sign * a a^T, B += sign * z a^T over the support of a.
void accumulate(Eigen::MatrixXd& A, Eigen::MatrixXd& B, const Eigen::VectorXd& z,
                const SparseCoef& a, double sign) {
  for (std::size_t u = 0; u < a.index.size(); ++u) {
    const double au = sign * a.value[u];
    B.col(a.index[u]) += au * z;
    for (std::size_t v = 0; v < a.index.size(); ++v) A(a.index[u], a.index[v]) += au * a.value[v];
  }
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& z, const std::vector<int>& cols) {
  Eigen::MatrixXd out(z.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = z.col(cols[i]);
  return out;
}

}  // namespace

CoupledDictionary train_coupled_dictionary(const std::vector<TrainingSample>& samples,
                                           const TrainingConfig& cfg,
                                           const std::string& class_name, Role role,
                                           TrainingReport* report, const EpochCallback& on_epoch) {
  const int m = static_cast<int>(samples.size());
  const int n = cfg.n_atoms;
  if (n < 1) throw ArgumentError("train: n_atoms must be >= 1");
  if (m < n) {
    throw ArgumentError("train: " + std::to_string(m) + " samples is fewer than n_atoms = " +
                        std::to_string(n));
  }
  if (!(cfg.lambda > 0.0)) throw ArgumentError("train: lambda must be > 0");
  if (cfg.epochs < 1 || cfg.minibatch < 1) {
    throw ArgumentError("train: epochs and minibatch must be >= 1");
  }
  const Eigen::Index p_high = samples.front().high_patch.size();
  const Eigen::Index p_low = samples.front().features.size();
  if (p_high < 1 || p_low < 1) throw ArgumentError("train: empty feature or patch vectors");
  const double scaling = static_cast<double>(p_low) / static_cast<double>(p_high);
  const Eigen::MatrixXd Z = joint_samples(samples, scaling);
  if (!Z.allFinite()) throw NumericError("train: non-finite sample values");
  const Eigen::VectorXd norms = Z.colwise().norm().transpose();
  if (norms.maxCoeff() == 0.0) throw TrainingError("train: all samples are zero");

  Rng rng(cfg.rng_seed);
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = m - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  const int holdout_count = m / 10;
  const bool has_holdout = holdout_count >= 1 && m - holdout_count >= n;
  std::vector<int> train(perm.begin(), perm.end() - (has_holdout ? holdout_count : 0));
  const std::vector<int> holdout(perm.end() - (has_holdout ? holdout_count : 0), perm.end());

  // Initial atoms: distinct training samples in shuffled order, nonzero first.
  DictionaryMatrix D(Z.rows(), n);
  {
    std::vector<int> pick;
    for (int i : train)
      if (static_cast<int>(pick.size()) < n && norms(i) > 0.0) pick.push_back(i);
    for (std::size_t k = 0; static_cast<int>(pick.size()) < n; ++k) pick.push_back(pick[k]);
    for (int j = 0; j < n; ++j) D.col(j) = Z.col(pick[j]) / norms(pick[j]);
  }

  const Eigen::MatrixXd Z_eval = gather(Z, has_holdout ? holdout : train);
  TrainingReport local;
  TrainingReport& rep = report != nullptr ? *report : local;
  rep = TrainingReport{};
  rep.has_holdout = has_holdout;
  rep.initial_objective = coding_objective(Z_eval, D, cfg.lambda, cfg.lasso_tol, cfg.lasso_max_iter);

  std::vector<SparseCoef> codes(m);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(Z.rows(), n);
  const LassoOptions opts{cfg.lambda, cfg.lasso_tol, cfg.lasso_max_iter};

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order = train;
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      std::swap(order[i], order[rng.index(i + 1)]);
    }
    std::vector<int> usage(n, 0);
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      const std::size_t stop = std::min(order.size(), start + cfg.minibatch);
      const LassoSolver solver(D);
      std::vector<SparseCoef> fresh(stop - start);
#pragma omp parallel for schedule(dynamic, 8)
      for (std::size_t b = start; b < stop; ++b) {
        const int i = order[b];
        Eigen::VectorXd warm = Eigen::VectorXd::Zero(n);
        for (std::size_t u = 0; u < codes[i].index.size(); ++u) warm(codes[i].index[u]) = codes[i].value[u];
        fresh[b - start] = to_sparse(solver.solve(Z.col(i), opts, &warm).coefficients);
      }
      for (std::size_t b = start; b < stop; ++b) {
        const int i = order[b];
        accumulate(A, B, Z.col(i), codes[i], -1.0);
        codes[i] = std::move(fresh[b - start]);
        accumulate(A, B, Z.col(i), codes[i], 1.0);
        for (int j : codes[i].index) ++usage[j];
      }
      // One block-coordinate pass over the atoms.
      for (int j = 0; j < n; ++j) {
        const double ajj = A(j, j);
        if (ajj < 1e-12) continue;
        Eigen::VectorXd u = (B.col(j) - D * A.col(j)) / ajj + D.col(j);
        const double un = u.norm();
        if (un < 1e-12) continue;
        D.col(j) = u / un;
      }
    }

    // Replace atoms unused this epoch by the worst-reconstructed samples.
    EpochReport er;
    er.epoch = epoch;
    std::vector<int> dead;
    for (int j = 0; j < n; ++j)
      if (usage[j] == 0) dead.push_back(j);
    if (!dead.empty()) {
      std::vector<std::pair<double, int>> errors;
      errors.reserve(train.size());
      for (int i : train) {
        if (norms(i) == 0.0) continue;
        Eigen::VectorXd r = Z.col(i);
        for (std::size_t u = 0; u < codes[i].index.size(); ++u) r -= codes[i].value[u] * D.col(codes[i].index[u]);
        errors.emplace_back(-r.squaredNorm(), i);
      }
      std::sort(errors.begin(), errors.end());
      for (std::size_t k = 0; k < dead.size() && k < errors.size(); ++k) {
        const int i = errors[k].second;
        D.col(dead[k]) = Z.col(i) / norms(i);
        ++er.replaced_atoms;
      }
    }
    er.objective = coding_objective(Z_eval, D, cfg.lambda, cfg.lasso_tol, cfg.lasso_max_iter);
    rep.epochs.push_back(er);
    if (on_epoch) on_epoch(er);
  }

  CoupledDictionary out;
  out.class_name = class_name;
  out.role = role;
  out.scaling = scaling;
  out.patch_size = cfg.patch_size;
  out.magnification = cfg.magnification;
  out.d_low = D.bottomRows(p_low);
  out.d_high = D.topRows(p_high) / std::sqrt(scaling);
  for (int j = 0; j < n; ++j) {
    const double ln = out.d_low.col(j).norm();
    if (ln < 1e-12) {
      throw TrainingError("train: atom " + std::to_string(j) + " has an empty feature block");
    }
    out.d_low.col(j) /= ln;
    out.d_high.col(j) /= ln;
  }
  return out;
}

std::vector<int> kmeans(const Eigen::MatrixXd& points, int clusters, std::uint64_t rng_seed,
                        int iterations) {
  const int N = static_cast<int>(points.cols());
  if (clusters < 1 || clusters > N) {
    throw ArgumentError("kmeans: clusters (" + std::to_string(clusters) +
                        ") must be between 1 and the number of points (" + std::to_string(N) + ")");
  }
  Rng rng(rng_seed);
  Eigen::MatrixXd centers(points.rows(), clusters);
  centers.col(0) = points.col(static_cast<Eigen::Index>(rng.index(N)));
  Eigen::VectorXd nearest = (points.colwise() - centers.col(0)).colwise().squaredNorm().transpose();
  for (int c = 1; c < clusters; ++c) {
    const double total = nearest.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = N - 1;
      for (Eigen::Index i = 0; i < N; ++i) {
        acc += nearest(i);
        if (acc > r && nearest(i) > 0.0) {
          pick = i;
          break;
        }
      }
      while (nearest(pick) == 0.0 && pick > 0) --pick;
    } else {
      pick = static_cast<Eigen::Index>(rng.index(N));
    }
    centers.col(c) = points.col(pick);
    nearest = nearest.cwiseMin((points.colwise() - centers.col(c)).colwise().squaredNorm().transpose());
  }

  std::vector<int> assign(N, -1);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (int i = 0; i < N; ++i) {
      Eigen::Index best = 0;
      (centers.colwise() - points.col(i)).colwise().squaredNorm().minCoeff(&best);
      if (assign[i] != best) {
        assign[i] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), clusters);
    std::vector<int> counts(clusters, 0);
    for (int i = 0; i < N; ++i) {
      sums.col(assign[i]) += points.col(i);
      ++counts[assign[i]];
    }
    for (int c = 0; c < clusters; ++c)
      if (counts[c] > 0) centers.col(c) = sums.col(c) / counts[c];
  }
  return assign;
}

DictionaryStats dictionary_stats(const CoupledDictionary& fg, const CoupledDictionary& bg,
                                 int clusters, std::uint64_t rng_seed) {
  if (fg.p_low() != bg.p_low()) {
    throw ArgumentError("dictionary_stats: feature dimensions differ (" +
                        std::to_string(fg.p_low()) + " vs " + std::to_string(bg.p_low()) + ")");
  }
  Eigen::MatrixXd points(fg.p_low(), fg.atoms() + bg.atoms());
  points << fg.d_low, bg.d_low;
  DictionaryStats stats;
  stats.cluster_count = clusters;
  stats.assignment = kmeans(points, clusters, rng_seed);
  stats.fg_counts.assign(clusters, 0);
  stats.bg_counts.assign(clusters, 0);
  for (int i = 0; i < static_cast<int>(stats.assignment.size()); ++i) {
    (i < fg.atoms() ? stats.fg_counts : stats.bg_counts)[stats.assignment[i]]++;
  }
  return stats;
}

namespace {

constexpr char kMagic[8] = {'S', 'S', 'R', 'D', 'I', 'C', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("load_dictionary: truncated file " + path_);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_dictionary(const CoupledDictionary& d, const std::filesystem::path& path) {
  if (d.d_low.cols() != d.d_high.cols()) {
    throw ArgumentError("save_dictionary: D_low and D_high atom counts differ");
  }
  std::string out(kMagic, kMagic + 8);
  put_u32(out, CoupledDictionary::kVersion);
  put_u32(out, static_cast<std::uint32_t>(d.atoms()));
  put_u32(out, static_cast<std::uint32_t>(d.p_low()));
  put_u32(out, static_cast<std::uint32_t>(d.p_high()));
  put_u32(out, static_cast<std::uint32_t>(d.patch_size));
  put_u32(out, static_cast<std::uint32_t>(d.magnification));
  put_u32(out, static_cast<std::uint32_t>(d.role));
  put_u32(out, static_cast<std::uint32_t>(d.class_name.size()));
  out += d.class_name;
  for (Eigen::Index i = 0; i < d.d_low.size(); ++i) put_f64(out, d.d_low.data()[i]);
  for (Eigen::Index i = 0; i < d.d_high.size(); ++i) put_f64(out, d.d_high.data()[i]);
  put_f64(out, d.scaling);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_dictionary: cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("save_dictionary: write failed for " + path.string());
}

CoupledDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_dictionary: cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes, path.string());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("load_dictionary: " + path.string() + " does not start with magic SSRDICT1");
  }
  r.str(8);
  const std::uint32_t version = r.u32();
  if (version != CoupledDictionary::kVersion) {
    throw FormatError("load_dictionary: unsupported version " + std::to_string(version) + " in " +
                      path.string());
  }
  const std::uint32_t n = r.u32(), p_low = r.u32(), p_high = r.u32();
  CoupledDictionary d;
  d.patch_size = static_cast<int>(r.u32());
  d.magnification = static_cast<int>(r.u32());
  const std::uint32_t role = r.u32();
  if (role > 1) throw FormatError("load_dictionary: bad role flag in " + path.string());
  d.role = static_cast<Role>(role);
  const std::uint32_t name_len = r.u32();
  d.class_name = r.str(name_len);
  const std::uint64_t expected = 8ull * (static_cast<std::uint64_t>(n) * (p_low + p_high) + 1);
  if (r.remaining() != expected) {
    throw FormatError("load_dictionary: payload size does not match header dimensions in " +
                      path.string());
  }
  d.d_low.resize(p_low, n);
  d.d_high.resize(p_high, n);
  for (Eigen::Index i = 0; i < d.d_low.size(); ++i) d.d_low.data()[i] = r.f64();
  for (Eigen::Index i = 0; i < d.d_high.size(); ++i) d.d_high.data()[i] = r.f64();
  d.scaling = r.f64();
  return d;
}

}  // namespace ssr
