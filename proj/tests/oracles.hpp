#pragma once

// Independent reference implementations used to cross-check the library.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "icon/autodiff.hpp"
#include "icon/rng.hpp"

namespace oracle {

struct Box {
  double x, y, w, h;
};

inline double overlap_1d(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

inline double inter(const Box& a, const Box& b) {
  return overlap_1d(a.x, a.x + a.w, b.x, b.x + b.w) * overlap_1d(a.y, a.y + a.h, b.y, b.y + b.h);
}

inline double iou(const Box& a, const Box& b) {
  const double i = inter(a, b);
  const double u = a.w * a.h + b.w * b.h - i;
  return u > 0 ? std::min(1.0, i / u) : 0.0;
}

inline double visibility(const Box& c, const Box& gt) { return std::min(1.0, inter(c, gt) / (gt.w * gt.h)); }

inline double triangle(double x, double lo, double peak, double hi) {
  if (x <= lo || x >= hi) return 0.0;
  return x <= peak ? (x - lo) / (peak - lo) : (hi - x) / (hi - peak);
}

// Share of column-mean attention on tokens whose cell centers (over gt) fall in c.
inline double mass_in(const Eigen::MatrixXd& attn, int rows, int cols, const Box& c, const Box& gt) {
  double in = 0, all = 0;
  for (int k = 0; k < rows * cols; ++k) {
    double colsum = 0;
    for (int i = 0; i < attn.rows(); ++i) colsum += attn(i, k);
    const int r = k / cols, q = k % cols;
    const double px = gt.x + gt.w * (q + 0.5) / cols, py = gt.y + gt.h * (r + 0.5) / rows;
    all += colsum;
    if (px >= c.x && px < c.x + c.w && py >= c.y && py < c.y + c.h) in += colsum;
  }
  return all > 0 ? in / all : 0.0;
}

// Every permutation of 0..n-1 in lexicographic order.
inline void for_each_permutation(int n, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  do f(p);
  while (std::next_permutation(p.begin(), p.end()));
}

// AP and first-hit rank by direct scan: sort by score, greedily match each
// entry to the best unmatched gt box in its scene.
struct Item {
  int scene;
  Box box;
  double score;
};

struct ScanResult {
  double ap;
  int first_hit;
};

inline ScanResult scan(std::vector<Item> items, const std::vector<std::pair<int, Box>>& gts) {
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score > b.score; });
  std::vector<bool> used(gts.size(), false);
  int hits = 0, first = 0;
  double acc = 0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    int best = -1;
    double best_o = 0.5;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].first != items[k].scene) continue;
      const double o = iou(items[k].box, gts[g].second);
      if (o >= best_o) {
        best_o = o;
        best = static_cast<int>(g);
      }
    }
    if (best < 0) continue;
    used[static_cast<std::size_t>(best)] = true;
    ++hits;
    if (!first) first = static_cast<int>(k) + 1;
    acc += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return {acc / static_cast<double>(gts.size()), first};
}

// Average ranks (ties share the mean rank), then Pearson on ranks.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        if (w < v[i]) ++less;
        if (w == v[i]) ++equal;
      }
      r[i] = less + (equal + 1) / 2.0;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// One-sided sign test tail by exact binomial summation.
inline double binomial_upper_tail(int k, int n) {
  double total = 0, c = 1;  // c = C(n, i)
  for (int i = 0; i <= n; ++i) {
    if (i >= k) total += c;
    c = c * (n - i) / (i + 1);
  }
  return total / std::pow(2.0, n);
}

inline Eigen::MatrixXd random_stochastic(int rows, int cols, icon::Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    double s = 0;
    for (int j = 0; j < cols; ++j) s += m(i, j) = rng.uniform(0.01, 1.0);
    m.row(i) /= s;
  }
  return m;
}

struct GradCheck {
  int checked = 0;
  double worst = 0.0;
};

// Central differences on `coords` random coordinates drawn from the given
// parameters (only those that received a gradient).
inline GradCheck finite_difference_check(const std::vector<icon::ad::Var>& params,
                                         const std::function<icon::ad::Var()>& loss, int coords, icon::Rng& rng,
                                         double h = 1e-5) {
  for (const auto& p : params) p.zero_grad();
  icon::ad::backward(loss());
  std::vector<std::size_t> live;
  for (std::size_t k = 0; k < params.size(); ++k)
    if (params[k].has_grad()) live.push_back(k);
  std::vector<Eigen::MatrixXd> grads;
  for (const auto& p : params) grads.push_back(p.has_grad() ? p.grad() : Eigen::MatrixXd());
  GradCheck out;
  for (int c = 0; c < coords && !live.empty(); ++c) {
    const auto& p = params[live[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(live.size()) - 1))]];
    const std::size_t pk = static_cast<std::size_t>(&p - params.data());
    const auto i = static_cast<Eigen::Index>(rng.integer(0, p.rows() - 1));
    const auto j = static_cast<Eigen::Index>(rng.integer(0, p.cols() - 1));
    const double orig = p.value()(i, j);
    double plus, minus;
    {
      icon::ad::NoGradGuard g;
      p.mutable_value()(i, j) = orig + h;
      plus = loss().scalar();
      p.mutable_value()(i, j) = orig - h;
      minus = loss().scalar();
      p.mutable_value()(i, j) = orig;
    }
    const double numeric = (plus - minus) / (2 * h);
    const double analytic = grads[pk](i, j);
    const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    out.worst = std::max(out.worst, rel);
    ++out.checked;
  }
  for (const auto& p : params) p.zero_grad();
  return out;
}

}  // namespace oracle
