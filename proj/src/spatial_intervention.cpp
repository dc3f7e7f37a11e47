#include "icon/spatial_intervention.hpp"

#include <algorithm>
#include <cmath>

#include "icon/error.hpp"
#include "icon/toy_model.hpp"

namespace icon {
namespace {

bool contains(const BoundingBox& r, double x, double y) {
  return x >= r.x && x < r.right() && y >= r.y && y < r.bottom();
}

}  // namespace

void InterventionConfig::validate() const {
  triangular_membership(iou_window.peak, iou_window);
  triangular_membership(vis_window.peak, vis_window);
  if (alpha_adv < 0.0 || alpha_geo < 0.0 || std::abs(alpha_adv + alpha_geo - 1.0) > 1e-12) {
    throw Error(ErrorKind::kConfigError, "alpha_adv and alpha_geo must be non-negative and sum to 1");
  }
  if (!(warmup > 0.0)) throw Error(ErrorKind::kConfigError, "warm-up period must be positive");
  if (shift_fracs.empty() || scale_facs.empty()) {
    throw Error(ErrorKind::kConfigError, "candidate shift/scale grids must be non-empty");
  }
}

double attention_mass(const ad::Matrix& attention, int grid_rows, int grid_cols, const BoundingBox& region,
                      const BoundingBox& gt) {
  const Eigen::VectorXd importance = token_importance(attention);
  double inside = 0.0, total = 0.0;
  for (int r = 0; r < grid_rows; ++r) {
    for (int c = 0; c < grid_cols; ++c) {
      const double a = importance(r * grid_cols + c);
      const double cx = gt.x + (c + 0.5) * gt.w / grid_cols;
      const double cy = gt.y + (r + 0.5) * gt.h / grid_rows;
      total += a;
      if (region.w > 0.0 && region.h > 0.0 && contains(region, cx, cy)) inside += a;
    }
  }
  if (total <= 0.0) return 0.0;
  return std::clamp(inside / total, 0.0, 1.0);
}

double semantic_info_loss(const ad::Matrix& attention, int grid_rows, int grid_cols, const BoundingBox& gt,
                          const BoundingBox& candidate) {
  return 1.0 - attention_mass(attention, grid_rows, grid_cols, intersect(candidate, gt), gt);
}

double geometric_realism(const BoundingBox& candidate, const BoundingBox& gt, const InterventionConfig& cfg) {
  const double m_iou = triangular_membership(iou(candidate, gt), cfg.iou_window);
  const double m_vis = triangular_membership(visibility(candidate, gt), cfg.vis_window);
  return cfg.fuzzy_and == FuzzyAnd::kMin ? std::min(m_iou, m_vis) : m_iou * m_vis;
}

double curriculum_stability(double t, const BoundingBox& gt, const InterventionConfig& cfg) {
  const double ramp = std::min(1.0, t / cfg.warmup);
  return std::min(gt.w, gt.h) > cfg.tau ? ramp : 0.0;
}

ScoredCandidate score_candidate(const BoundingBox& candidate, const ad::Matrix& attention, int grid_rows,
                                int grid_cols, const BoundingBox& gt, double t, const InterventionConfig& cfg) {
  ScoredCandidate s;
  s.box = candidate;
  s.s_adv = semantic_info_loss(attention, grid_rows, grid_cols, gt, candidate);
  s.s_geo = geometric_realism(candidate, gt, cfg);
  s.s_stab = curriculum_stability(t, gt, cfg);
  s.j = s.s_stab * (cfg.alpha_adv * s.s_adv + cfg.alpha_geo * s.s_geo);
  return s;
}

ScoredCandidate select_intervention(const CandidatePool& pool, const ad::Matrix& attention, int grid_rows,
                                    int grid_cols, const BoundingBox& gt, double t,
                                    const InterventionConfig& cfg) {
  if (pool.candidates.empty()) throw Error(ErrorKind::kEmptyPool, "candidate pool is empty");
  if (curriculum_stability(t, gt, cfg) == 0.0) {
    ScoredCandidate noop = score_candidate(gt, attention, grid_rows, grid_cols, gt, t, cfg);
    noop.index = -1;
    return noop;
  }
  ScoredCandidate best;
  for (std::size_t k = 0; k < pool.candidates.size(); ++k) {
    ScoredCandidate s = score_candidate(pool.candidates[k], attention, grid_rows, grid_cols, gt, t, cfg);
    s.index = static_cast<int>(k);
    if (best.index < 0 || s.j > best.j) best = s;
  }
  return best;
}

}  // namespace icon
