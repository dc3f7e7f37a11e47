#include "icon/context_disentanglement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "icon/assignment.hpp"
#include "icon/error.hpp"

namespace icon {

int DisentanglementMask::popcount() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::vector<int> top_k_indices(const Eigen::VectorXd& scores, int k) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
  order.resize(static_cast<std::size_t>(std::clamp<Eigen::Index>(k, 0, scores.size())));
  std::sort(order.begin(), order.end());
  return order;
}

DisentanglementMask saliency_mask(const TokenFeatureMap& fmap, double ratio, ActivationRanking ranking) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::kDomainError, "foreground ratio must lie in (0, 1)");
  const Eigen::VectorXd activation = ranking == ActivationRanking::kColumnMean
                                         ? token_importance(fmap.attention)
                                         : Eigen::VectorXd(fmap.attention.rowwise().mean());
  const int l = static_cast<int>(activation.size());
  DisentanglementMask m;
  m.foreground_ratio = ratio;
  m.mask.assign(static_cast<std::size_t>(l), 0);
  for (int i : top_k_indices(activation, static_cast<int>(std::lround(ratio * l)))) m.mask[static_cast<std::size_t>(i)] = 1;
  return m;
}

BatchAssignment optimal_context_assignment(const std::vector<ad::Matrix>& maps, const AssignmentOptions& options) {
  const auto b = static_cast<Eigen::Index>(maps.size());
  if (b < 2) throw Error(ErrorKind::kBatchTooSmall, "context assignment needs a batch of at least 2");
  for (const ad::Matrix& m : maps) {
    if (m.rows() != maps[0].rows() || m.cols() != maps[0].cols()) {
      throw Error(ErrorKind::kShapeMismatch, "attention maps differ in shape");
    }
  }
  if (!options.forbid_same_pid.empty() && static_cast<Eigen::Index>(options.forbid_same_pid.size()) != b) {
    throw Error(ErrorKind::kLengthMismatch, "pid list does not match the batch");
  }
  constexpr double kForbidden = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd cost(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) {
      cost(i, j) = (maps[static_cast<std::size_t>(i)] - maps[static_cast<std::size_t>(j)]).squaredNorm();
      if (options.derangement && i == j) cost(i, j) = kForbidden;
      if (!options.forbid_same_pid.empty() &&
          options.forbid_same_pid[static_cast<std::size_t>(i)] == options.forbid_same_pid[static_cast<std::size_t>(j)] &&
          (i != j || options.derangement)) {
        cost(i, j) = kForbidden;
      }
    }
  }
  const AssignmentResult r = solve_assignment_lexicographic(cost);
  if (!std::isfinite(r.cost)) throw Error(ErrorKind::kDomainError, "no admissible donor assignment for this batch");
  return {r.row_to_col, r.cost};
}

TokenFeatureMap synthesize_counterfactual(const TokenFeatureMap& target, const TokenFeatureMap& donor,
                                          const DisentanglementMask& mask) {
  if (target.tokens.rows() != donor.tokens.rows() || target.tokens.cols() != donor.tokens.cols() ||
      static_cast<Eigen::Index>(mask.mask.size()) != target.tokens.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "counterfactual blend needs matching shapes");
  }
  Eigen::VectorXd keep(static_cast<Eigen::Index>(mask.mask.size()));
  for (std::size_t i = 0; i < mask.mask.size(); ++i) keep(static_cast<Eigen::Index>(i)) = mask.mask[i] ? 1.0 : 0.0;
  const Eigen::VectorXd context = Eigen::VectorXd::Ones(keep.size()) - keep;
  TokenFeatureMap cf;
  cf.tokens = ad::scale_rows(target.tokens, keep) + ad::scale_rows(donor.tokens, context);
  cf.attention = target.attention;
  cf.grid_rows = target.grid_rows;
  cf.grid_cols = target.grid_cols;
  return cf;
}

ConsistencyLoss counterfactual_consistency_loss(const ad::Var& original, const ad::Var& cf, int pid,
                                                const OimState& oim) {
  ConsistencyLoss out;
  out.identity = oim_loss(cf, pid, oim);
  out.consistency = ad::sum(ad::square(original - cf));
  out.total = out.identity + out.consistency;
  return out;
}

}  // namespace icon
