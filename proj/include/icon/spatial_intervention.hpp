#pragma once

#include <vector>

#include "icon/autodiff.hpp"
#include "icon/geometry.hpp"

namespace icon {

enum class FuzzyAnd { kMin, kProduct };

struct InterventionConfig {
  double warmup = 2.0;  // T_warm, in units of `t` (epochs by default)
  double tau = 16.0;    // minimum scale threshold in pixels
  TriangularWindow iou_window{0.3, 0.6, 0.95};
  TriangularWindow vis_window{0.4, 0.7, 1.01};
  double alpha_adv = 0.5;
  double alpha_geo = 0.5;
  FuzzyAnd fuzzy_and = FuzzyAnd::kMin;
  std::vector<double> shift_fracs{-0.3, -0.15, 0.0, 0.15, 0.3};
  std::vector<double> scale_facs{0.7, 0.85, 1.0, 1.15, 1.3};
  bool count_iterations = false;  // t counts iterations instead of epochs

  // Throws ConfigError / DomainError.
  void validate() const;
};

struct ScoredCandidate {
  BoundingBox box;
  double s_adv = 0.0;
  double s_geo = 0.0;
  double s_stab = 0.0;
  double j = 0.0;
  int index = -1;  // position in the pool; -1 for the warm-up no-op
};

// Attention importance (column mean of A) of the tokens whose grid-cell
// centers, laid out over gt, fall inside `region`; normalized by the mass over gt.
double attention_mass(const ad::Matrix& attention, int grid_rows, int grid_cols, const BoundingBox& region,
                      const BoundingBox& gt);

double semantic_info_loss(const ad::Matrix& attention, int grid_rows, int grid_cols, const BoundingBox& gt,
                          const BoundingBox& candidate);

double geometric_realism(const BoundingBox& candidate, const BoundingBox& gt, const InterventionConfig& cfg);

double curriculum_stability(double t, const BoundingBox& gt, const InterventionConfig& cfg);

ScoredCandidate score_candidate(const BoundingBox& candidate, const ad::Matrix& attention, int grid_rows,
                                int grid_cols, const BoundingBox& gt, double t, const InterventionConfig& cfg);

// B* = argmax over the pool of s_stab · (α_adv·s_adv + α_geo·s_geo), first
// index wins ties. When s_stab = 0 the ground truth is returned unchanged.
// Throws EmptyPool.
ScoredCandidate select_intervention(const CandidatePool& pool, const ad::Matrix& attention, int grid_rows,
                                    int grid_cols, const BoundingBox& gt, double t,
                                    const InterventionConfig& cfg);

}  // namespace icon
