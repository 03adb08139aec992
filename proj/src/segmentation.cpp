#include "ssr/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <string>

namespace ssr {

SegmentMap::SegmentMap(int width, int height, std::vector<int> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  if (width < 0 || height < 0 ||
      labels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ArgumentError("SegmentMap: label count does not match dimensions");
  }
  std::vector<int> remap;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const int l = labels_[i];
    if (l < 0) throw ArgumentError("SegmentMap: negative label");
    if (static_cast<std::size_t>(l) >= remap.size()) remap.resize(l + 1, -1);
    if (remap[l] < 0) {
      remap[l] = static_cast<int>(pixels_.size());
      pixels_.emplace_back();
    }
    labels_[i] = remap[l];
    pixels_[remap[l]].push_back(static_cast<int>(i));
  }
}

RasterImage gaussian_smooth(const RasterImage& img, double sigma) {
  if (sigma < 0.0) throw ArgumentError("gaussian_smooth: sigma must be >= 0");
  if (sigma == 0.0) return img;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  }
  const double total = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& k : kernel) k /= total;
  return filter_y(filter_x(img, kernel), kernel);
}

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(n), rank_(n, 0), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Returns the surviving root.
  int join(int a, int b) {
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }
  int size(int root) const { return size_[root]; }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
  std::vector<int> size_;
};

struct Edge {
  int a, b;
  double w;
};

double color_distance(const RasterImage& img, int p, int q) {
  const int ch = img.channels();
  const auto d = img.data();
  double s = 0.0;
  for (int c = 0; c < ch; ++c) {
    const double diff = d[static_cast<std::size_t>(p) * ch + c] - d[static_cast<std::size_t>(q) * ch + c];
    s += diff * diff;
  }
  return std::sqrt(s);
}

// Splits a labelling into 4-connected components.
std::vector<int> split_4connected(int w, int h, const std::vector<int>& labels) {
  std::vector<int> out(labels.size(), -1);
  std::vector<int> stack;
  int next = 0;
  for (int start = 0; start < w * h; ++start) {
    if (out[start] >= 0) continue;
    out[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w, y = p / w;
      const int nbrs[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& n : nbrs) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h) continue;
        const int q = n[1] * w + n[0];
        if (out[q] < 0 && labels[q] == labels[p]) {
          out[q] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
  }
  return out;
}

// Merges components smaller than min_size into the 4-adjacent component
// with the closest mean colour, smallest first.
std::vector<int> merge_small(const RasterImage& img, std::vector<int> labels, int min_size) {
  const int w = img.width(), h = img.height(), ch = img.channels();
  const int count = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<int> size(count, 0);
  std::vector<Eigen::VectorXd> sum(count, Eigen::VectorXd::Zero(ch));
  std::vector<std::set<int>> adj(count);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p = y * w + x;
      const int l = labels[p];
      ++size[l];
      for (int c = 0; c < ch; ++c) sum[l](c) += img.at(x, y, c);
      if (x + 1 < w && labels[p + 1] != l) {
        adj[l].insert(labels[p + 1]);
        adj[labels[p + 1]].insert(l);
      }
      if (y + 1 < h && labels[p + w] != l) {
        adj[l].insert(labels[p + w]);
        adj[labels[p + w]].insert(l);
      }
    }
  }

  std::vector<int> parent(count);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  std::set<std::pair<int, int>> small;
  for (int l = 0; l < count; ++l) {
    if (size[l] < min_size) small.emplace(size[l], l);
  }
  while (!small.empty()) {
    const auto [sz, l] = *small.begin();
    small.erase(small.begin());
    std::set<int> nbrs;
    for (int n : adj[l]) {
      const int r = find(n);
      if (r != l) nbrs.insert(r);
    }
    if (nbrs.empty()) continue;
    const Eigen::VectorXd mean = sum[l] / sz;
    int target = -1;
    double best = 0.0;
    for (int n : nbrs) {
      const double d = (sum[n] / size[n] - mean).norm();
      if (target < 0 || d < best) {
        best = d;
        target = n;
      }
    }
    if (size[target] < min_size) small.erase({size[target], target});
    parent[l] = target;
    size[target] += sz;
    sum[target] += sum[l];
    nbrs.erase(target);
    if (adj[target].size() < adj[l].size()) std::swap(adj[target], adj[l]);
    adj[target].insert(adj[l].begin(), adj[l].end());
    adj[l].clear();
    if (size[target] < min_size) small.emplace(size[target], target);
  }
  for (int& l : labels) l = find(l);
  return labels;
}

}  // namespace

SegmentMap oversegment(const RasterImage& img, const SegmentationParams& params) {
  if (img.empty()) throw ArgumentError("oversegment: empty image");
  if (params.smoothing_sigma < 0.0) throw ArgumentError("oversegment: smoothing_sigma must be >= 0");
  if (!(params.threshold_k > 0.0)) throw ArgumentError("oversegment: threshold_k must be > 0");
  if (params.min_segment_size < 0) throw ArgumentError("oversegment: min_segment_size must be >= 1");
  const int w = img.width(), h = img.height();
  const int n = w * h;
  const int min_size = params.min_segment_size > 0 ? params.min_segment_size
                                                   : std::max(1, n / 1000);

  const RasterImage smooth = gaussian_smooth(img, params.smoothing_sigma);
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p = y * w + x;
      if (x + 1 < w) edges.push_back({p, p + 1, color_distance(smooth, p, p + 1)});
      if (y + 1 < h) edges.push_back({p, p + w, color_distance(smooth, p, p + w)});
      if (x + 1 < w && y + 1 < h) edges.push_back({p, p + w + 1, color_distance(smooth, p, p + w + 1)});
      if (x + 1 < w && y > 0) edges.push_back({p, p - w + 1, color_distance(smooth, p, p - w + 1)});
    }
  }
  // Stable sort keeps ties in edge-index order.
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.w < b.w; });

  DisjointSet sets(n);
  std::vector<double> threshold(n, params.threshold_k);
  for (const Edge& e : edges) {
    const int a = sets.find(e.a);
    const int b = sets.find(e.b);
    if (a == b) continue;
    if (e.w <= threshold[a] && e.w <= threshold[b]) {
      const int r = sets.join(a, b);
      threshold[r] = e.w + params.threshold_k / sets.size(r);
    }
  }

  std::vector<int> roots(n);
  for (int p = 0; p < n; ++p) roots[p] = sets.find(p);
  std::vector<int> labels = split_4connected(w, h, roots);
  if (min_size > 1) labels = merge_small(img, std::move(labels), min_size);
  return SegmentMap(w, h, std::move(labels));
}

std::vector<std::vector<int>> segment_adjacency(const SegmentMap& seg) {
  std::vector<std::set<int>> sets(seg.segment_count());
  const int w = seg.width(), h = seg.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = seg.label(x, y);
      if (x + 1 < w && seg.label(x + 1, y) != l) {
        sets[l].insert(seg.label(x + 1, y));
        sets[seg.label(x + 1, y)].insert(l);
      }
      if (y + 1 < h && seg.label(x, y + 1) != l) {
        sets[l].insert(seg.label(x, y + 1));
        sets[seg.label(x, y + 1)].insert(l);
      }
    }
  }
  std::vector<std::vector<int>> out(sets.size());
  for (std::size_t g = 0; g < sets.size(); ++g) out[g].assign(sets[g].begin(), sets[g].end());
  return out;
}

std::vector<Eigen::VectorXd> segment_means(const SegmentMap& seg, const RasterImage& img) {
  if (img.width() != seg.width() || img.height() != seg.height()) {
    throw ArgumentError("segment_means: image and segment map dimensions differ");
  }
  const int ch = img.channels();
  std::vector<Eigen::VectorXd> means(seg.segment_count(), Eigen::VectorXd::Zero(ch));
  for (int g = 0; g < seg.segment_count(); ++g) {
    for (int p : seg.pixels(g)) {
      for (int c = 0; c < ch; ++c) means[g](c) += img.data()[static_cast<std::size_t>(p) * ch + c];
    }
    means[g] /= static_cast<double>(seg.pixels(g).size());
  }
  return means;
}

RasterImage render_false_color(const SegmentMap& seg) {
  RasterImage out(seg.width(), seg.height(), 3);
  for (int y = 0; y < seg.height(); ++y) {
    for (int x = 0; x < seg.width(); ++x) {
      std::uint32_t hash = static_cast<std::uint32_t>(seg.label(x, y)) * 2654435761u;
      hash ^= hash >> 15;
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = 0.15 + 0.85 * ((hash >> (8 * c)) & 0xff) / 255.0;
      }
    }
  }
  return out;
}

namespace {

constexpr char kSegMagic[8] = {'S', 'S', 'R', 'S', 'E', 'G', '0', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_segment_labels(const SegmentMap& seg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kSegMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(seg.height()));
  put_u32(out, static_cast<std::uint32_t>(seg.width()));
  for (int l : seg.labels()) put_u32(out, static_cast<std::uint32_t>(l));
  if (!out) throw IoError("write failed: " + path.string());
}

SegmentMap load_segment_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kSegMagic, 8) != 0) {
    throw FormatError("not a segment label file (expected magic SSRSEG01): " + path.string());
  }
  const std::uint32_t h = get_u32(bytes.data() + 8);
  const std::uint32_t w = get_u32(bytes.data() + 12);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (bytes.size() != 16 + 4 * n) {
    throw FormatError("segment label file size does not match header: " + path.string());
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<std::int32_t>(get_u32(bytes.data() + 16 + 4 * i));
    if (labels[i] < 0) throw FormatError("negative label in " + path.string());
  }
  return SegmentMap(static_cast<int>(w), static_cast<int>(h), std::move(labels));
}

}  // namespace ssr
