#include "icon/semantic_regularization.hpp"

#include <cmath>

#include "icon/context_disentanglement.hpp"
#include "icon/error.hpp"

namespace icon {
namespace {

Eigen::VectorXd zscore(const Eigen::VectorXd& v) {
  const double mu = v.mean();
  const double sd = std::sqrt((v.array() - mu).square().mean());
  if (sd <= 0.0) return Eigen::VectorXd::Zero(v.size());
  return ((v.array() - mu) / sd).matrix();
}

}  // namespace

SaliencyScores token_saliency(const TokenFeatureMap& fmap, SaliencyCombination combination) {
  const Eigen::VectorXd norms = fmap.tokens.value().rowwise().norm();
  const Eigen::VectorXd attn = token_importance(fmap.attention);
  if (norms.size() != attn.size()) throw Error(ErrorKind::kShapeMismatch, "token and attention counts differ");
  SaliencyScores s;
  s.scores = combination == SaliencyCombination::kProduct ? Eigen::VectorXd(norms.cwiseProduct(attn))
                                                          : Eigen::VectorXd(zscore(norms) + zscore(attn));
  return s;
}

int masked_token_count(int num_tokens, double mask_ratio) {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw Error(ErrorKind::kDomainError, "mask ratio must lie in (0, 1)");
  return static_cast<int>(std::lround(mask_ratio * num_tokens));
}

MaskedView mask_tokens(const TokenFeatureMap& fmap, const std::vector<int>& masked_idx, const ad::Var& mask_token) {
  if (mask_token.rows() != 1 || mask_token.cols() != fmap.tokens.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "mask token must be 1 x D");
  }
  const Eigen::Index l = fmap.tokens.rows();
  Eigen::VectorXd keep = Eigen::VectorXd::Ones(l);
  ad::Matrix indicator = ad::Matrix::Zero(l, 1);
  for (int i : masked_idx) {
    if (i < 0 || i >= l) throw Error(ErrorKind::kShapeMismatch, "masked index out of range");
    keep(i) = 0.0;
    indicator(i, 0) = 1.0;
  }
  MaskedView view;
  view.masked_idx = masked_idx;
  view.corrupted.tokens =
      ad::scale_rows(fmap.tokens, keep) + ad::matmul(ad::Var::constant(indicator), mask_token);
  view.corrupted.attention = fmap.attention;
  view.corrupted.grid_rows = fmap.grid_rows;
  view.corrupted.grid_cols = fmap.grid_cols;
  return view;
}

MaskedView adversarial_mask(const TokenFeatureMap& fmap, const SaliencyScores& saliency, double mask_ratio,
                            const ad::Var& mask_token) {
  if (saliency.scores.size() != fmap.tokens.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "saliency length differs from token count");
  }
  const int k = masked_token_count(fmap.num_tokens(), mask_ratio);
  return mask_tokens(fmap, top_k_indices(saliency.scores, k), mask_token);
}

ad::Var reconstruction_error(const ad::Var& reconstruction, const ad::Var& original,
                             const std::vector<int>& masked_idx, ReconstructionScoring scoring) {
  if (reconstruction.rows() != original.rows() || reconstruction.cols() != original.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "reconstruction and original differ in shape");
  }
  const ad::Var diff = reconstruction - original;
  if (scoring == ReconstructionScoring::kFullMap) {
    return ad::scale(ad::sum(ad::square(diff)), 1.0 / static_cast<double>(diff.rows()));
  }
  if (masked_idx.empty()) throw Error(ErrorKind::kShapeMismatch, "masked-only scoring needs masked tokens");
  const ad::Var picked = ad::gather_rows(diff, masked_idx);
  return ad::scale(ad::sum(ad::square(picked)), 1.0 / static_cast<double>(masked_idx.size()));
}

ad::Var reconstruction_loss(const MaskedView& view, const ad::Var& text_tokens, const ad::Var& original,
                            const ModelParams& params, ReconstructionScoring scoring) {
  return reconstruction_error(decode(view.corrupted.tokens, text_tokens, params), original, view.masked_idx,
                              scoring);
}

}  // namespace icon
