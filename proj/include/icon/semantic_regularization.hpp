#pragma once

#include <vector>

#include "icon/autodiff.hpp"
#include "icon/toy_model.hpp"

namespace icon {

enum class SaliencyCombination { kProduct, kAdditiveZScore };
enum class ReconstructionScoring { kMaskedOnly, kFullMap };

struct SaliencyScores {
  Eigen::VectorXd scores;  // S_sal, one per token
};

// S_sal[i] = ‖F[i]‖₂ · a_i with a_i the attention column mean (product mode),
// or z(‖F[i]‖) + z(a_i) in additive mode.
SaliencyScores token_saliency(const TokenFeatureMap& fmap,
                              SaliencyCombination combination = SaliencyCombination::kProduct);

struct MaskedView {
  TokenFeatureMap corrupted;    // F̃_vis
  std::vector<int> masked_idx;  // ascending
};

int masked_token_count(int num_tokens, double mask_ratio);

// Replaces the round(r·L) most salient tokens (ties to lower index) by the
// learned mask token. Attention is carried over unchanged.
MaskedView adversarial_mask(const TokenFeatureMap& fmap, const SaliencyScores& saliency, double mask_ratio,
                            const ad::Var& mask_token);
MaskedView mask_tokens(const TokenFeatureMap& fmap, const std::vector<int>& masked_idx, const ad::Var& mask_token);

// Mean over scored tokens of ‖F̂_i − F_i‖². Throws ShapeMismatch.
ad::Var reconstruction_error(const ad::Var& reconstruction, const ad::Var& original,
                             const std::vector<int>& masked_idx,
                             ReconstructionScoring scoring = ReconstructionScoring::kMaskedOnly);

// L_reg = error(𝒟(F̃_vis, T), F_orig).
ad::Var reconstruction_loss(const MaskedView& view, const ad::Var& text_tokens, const ad::Var& original,
                            const ModelParams& params,
                            ReconstructionScoring scoring = ReconstructionScoring::kMaskedOnly);

}  // namespace icon
