#pragma once

// Independent reference for graph-based segmentation: the classic
// forest/threshold pass followed by 4-connected splitting and a brute-force
// small-component merge by closest mean colour. Shares no code with the
// library implementation and is quadratic in the number of small segments.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "ssr/image.hpp"
#include "ssr/random.hpp"

namespace ssr {

inline RasterImage quadrant_image(int n, double noise_sigma, std::uint64_t seed) {
  const double level[4] = {0.15, 0.4, 0.65, 0.9};
  Rng rng(seed);
  RasterImage img(n, n, 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int q = (y >= n / 2) * 2 + (x >= n / 2);
      for (int c = 0; c < 3; ++c) {
        img.at(x, y, c) = std::clamp(level[q] + noise_sigma * rng.normal(), 0.0, 1.0);
      }
    }
  }
  return img;
}

namespace detail {

struct RefElt {
  int rank, p, size;
};

class Universe {
 public:
  explicit Universe(int n) : elts_(n) {
    for (int i = 0; i < n; ++i) elts_[i] = {0, i, 1};
  }
  int find(int x) {
    int y = x;
    while (y != elts_[y].p) y = elts_[y].p;
    elts_[x].p = y;
    return y;
  }
  void join(int x, int y) {
    if (elts_[x].rank > elts_[y].rank) {
      elts_[y].p = x;
      elts_[x].size += elts_[y].size;
    } else {
      elts_[x].p = y;
      elts_[y].size += elts_[x].size;
      if (elts_[x].rank == elts_[y].rank) elts_[y].rank++;
    }
  }
  int size(int x) const { return elts_[x].size; }

 private:
  std::vector<RefElt> elts_;
};

inline std::vector<double> smooth_channel(const std::vector<double>& src, int w, int h,
                                          double sigma) {
  const int len = static_cast<int>(std::ceil(sigma * 4.0)) + 1;
  std::vector<double> mask(len);
  for (int i = 0; i < len; ++i) mask[i] = std::exp(-0.5 * (i / sigma) * (i / sigma));
  double sum = mask[0];
  for (int i = 1; i < len; ++i) sum += 2 * mask[i];
  for (double& m : mask) m /= sum;
  auto at = [&](const std::vector<double>& v, int x, int y) {
    return v[std::clamp(y, 0, h - 1) * w + std::clamp(x, 0, w - 1)];
  };
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = mask[0] * at(src, x, y);
      for (int i = 1; i < len; ++i) s += mask[i] * (at(src, x - i, y) + at(src, x + i, y));
      tmp[y * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = mask[0] * at(tmp, x, y);
      for (int i = 1; i < len; ++i) s += mask[i] * (at(tmp, x, y - i) + at(tmp, x, y + i));
      out[y * w + x] = s;
    }
  return out;
}

}  // namespace detail

inline std::vector<int> reference_segment(const RasterImage& img, double sigma, double k,
                                          int min_size) {
  const int w = img.width(), h = img.height(), ch = img.channels();
  std::vector<std::vector<double>> planes(ch);
  for (int c = 0; c < ch; ++c) {
    std::vector<double> p(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) p[y * w + x] = img.at(x, y, c);
    planes[c] = sigma > 0 ? detail::smooth_channel(p, w, h, sigma) : p;
  }
  auto diff = [&](int a, int b) {
    double s = 0;
    for (int c = 0; c < ch; ++c) s += (planes[c][a] - planes[c][b]) * (planes[c][a] - planes[c][b]);
    return std::sqrt(s);
  };
  struct E {
    double w;
    int a, b, idx;
  };
  std::vector<E> edges;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int p = y * w + x;
      if (x < w - 1) edges.push_back({diff(p, p + 1), p, p + 1, (int)edges.size()});
      if (y < h - 1) edges.push_back({diff(p, p + w), p, p + w, (int)edges.size()});
      if (x < w - 1 && y < h - 1) edges.push_back({diff(p, p + w + 1), p, p + w + 1, (int)edges.size()});
      if (x < w - 1 && y > 0) edges.push_back({diff(p, p - w + 1), p, p - w + 1, (int)edges.size()});
    }
  std::sort(edges.begin(), edges.end(), [](const E& a, const E& b) {
    return a.w < b.w || (a.w == b.w && a.idx < b.idx);
  });
  detail::Universe u(w * h);
  std::vector<double> thr(w * h, k);
  for (const E& e : edges) {
    int a = u.find(e.a), b = u.find(e.b);
    if (a != b && e.w <= thr[a] && e.w <= thr[b]) {
      u.join(a, b);
      a = u.find(a);
      thr[a] = e.w + k / u.size(a);
    }
  }
  std::vector<int> roots(w * h);
  for (int p = 0; p < w * h; ++p) roots[p] = u.find(p);

  // 4-connected components, ids in raster order of first pixel.
  std::vector<int> labels(w * h, -1);
  int next = 0;
  for (int s = 0; s < w * h; ++s) {
    if (labels[s] >= 0) continue;
    std::vector<int> queue{s};
    labels[s] = next;
    for (std::size_t i = 0; i < queue.size(); ++i) {
      const int p = queue[i], x = p % w, y = p / w;
      const int cand[4] = {x > 0 ? p - 1 : -1, x < w - 1 ? p + 1 : -1, y > 0 ? p - w : -1,
                           y < h - 1 ? p + w : -1};
      for (int q : cand) {
        if (q >= 0 && labels[q] < 0 && roots[q] == roots[p]) {
          labels[q] = next;
          queue.push_back(q);
        }
      }
    }
    ++next;
  }

  // Brute-force small-component pass: repeatedly take the smallest
  // undersized component (lowest id on ties) and relabel it to the
  // 4-neighbour with the closest mean colour (lowest id on ties).
  std::vector<char> frozen(next, 0);
  for (;;) {
    std::vector<int> size(next, 0);
    std::vector<std::vector<double>> sum(next, std::vector<double>(ch, 0.0));
    for (int p = 0; p < w * h; ++p) {
      ++size[labels[p]];
      for (int c = 0; c < ch; ++c) sum[labels[p]][c] += img.at(p % w, p / w, c);
    }
    int pick = -1;
    for (int l = 0; l < next; ++l) {
      if (size[l] == 0 || size[l] >= min_size || frozen[l]) continue;
      if (pick < 0 || size[l] < size[pick]) pick = l;
    }
    if (pick < 0) break;
    std::vector<char> is_nbr(next, 0);
    for (int p = 0; p < w * h; ++p) {
      if (labels[p] != pick) continue;
      const int x = p % w, y = p / w;
      const int cand[4] = {x > 0 ? p - 1 : -1, x < w - 1 ? p + 1 : -1, y > 0 ? p - w : -1,
                           y < h - 1 ? p + w : -1};
      for (int q : cand)
        if (q >= 0 && labels[q] != pick) is_nbr[labels[q]] = 1;
    }
    int target = -1;
    double best = 0;
    for (int l = 0; l < next; ++l) {
      if (!is_nbr[l]) continue;
      double d = 0;
      for (int c = 0; c < ch; ++c) {
        const double diff = sum[l][c] / size[l] - sum[pick][c] / size[pick];
        d += diff * diff;
      }
      d = std::sqrt(d);
      if (target < 0 || d < best) {
        best = d;
        target = l;
      }
    }
    if (target < 0) {
      frozen[pick] = 1;
      continue;
    }
    for (int& l : labels)
      if (l == pick) l = target;
  }
  return labels;
}

// Fraction of pixels whose label agrees after mapping each label of `a` to
// its majority partner in `b`.
inline double directed_agreement(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, std::map<int, int>> table;
  for (std::size_t i = 0; i < a.size(); ++i) table[a[i]][b[i]]++;
  std::size_t agree = 0;
  for (const auto& [la, row] : table) {
    int best = 0;
    for (const auto& [lb, n] : row) best = std::max(best, n);
    agree += best;
  }
  return static_cast<double>(agree) / a.size();
}

// Symmetric agreement up to relabelling.
inline double label_agreement(const std::vector<int>& a, const std::vector<int>& b) {
  return std::min(directed_agreement(a, b), directed_agreement(b, a));
}

}  // namespace ssr
