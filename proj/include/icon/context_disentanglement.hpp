#pragma once

#include <cstdint>
#include <vector>

#include "icon/autodiff.hpp"
#include "icon/losses.hpp"
#include "icon/toy_model.hpp"

namespace icon {

enum class ActivationRanking { kColumnMean, kRowMean };

struct DisentanglementMask {
  std::vector<std::uint8_t> mask;  // 1 = foreground, 0 = context; token order
  double foreground_ratio = 0.5;

  int popcount() const;
};

// Indices of the top-k entries of `scores`; ties go to the lower index.
std::vector<int> top_k_indices(const Eigen::VectorXd& scores, int k);

DisentanglementMask saliency_mask(const TokenFeatureMap& fmap, double foreground_ratio,
                                  ActivationRanking ranking = ActivationRanking::kColumnMean);

struct BatchAssignment {
  std::vector<int> permutation;  // permutation[i] = donor of sample i (0-based)
  double cost = 0.0;
};

struct AssignmentOptions {
  bool derangement = true;           // forbid self-assignment
  std::vector<int> forbid_same_pid;  // when non-empty, donors must carry a different pid
};

// Σ_i ‖A_i − A_π(i)‖² minimized exactly over permutations; ties resolve to the
// lexicographically smallest permutation. Throws BatchTooSmall / ShapeMismatch.
BatchAssignment optimal_context_assignment(const std::vector<ad::Matrix>& attention_maps,
                                           const AssignmentOptions& options = {});

// F_cf = M ⊙ F_target + (1 − M) ⊙ F_donor with M broadcast across D. The
// result keeps the target's attention map. Throws ShapeMismatch.
TokenFeatureMap synthesize_counterfactual(const TokenFeatureMap& target, const TokenFeatureMap& donor,
                                          const DisentanglementMask& mask);

struct ConsistencyLoss {
  ad::Var identity;     // OIM term on the counterfactual embedding
  ad::Var consistency;  // ‖original − counterfactual‖²
  ad::Var total;
};

ConsistencyLoss counterfactual_consistency_loss(const ad::Var& original_embedding, const ad::Var& cf_embedding,
                                                int pid, const OimState& oim);

}  // namespace icon
