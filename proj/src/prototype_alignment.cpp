#include "icon/prototype_alignment.hpp"

#include <algorithm>
#include <cmath>

#include "icon/error.hpp"

namespace icon {

PrototypeTable compute_prototypes(const ad::Matrix& features, const std::vector<int>& pids) {
  if (static_cast<Eigen::Index>(pids.size()) != features.rows()) {
    throw Error(ErrorKind::kLengthMismatch, "features and pids must align");
  }
  PrototypeTable table;
  for (std::size_t i = 0; i < pids.size(); ++i) table.members[pids[i]].push_back(static_cast<int>(i));
  for (const auto& [pid, idx] : table.members) {
    Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(features.cols());
    for (int i : idx) mu += features.row(i);
    mu /= static_cast<double>(idx.size());
    const double n = mu.norm();
    if (n < 1e-8) throw Error(ErrorKind::kDegeneratePrototype, "prototype mean has (near) zero norm");
    table.prototypes[pid] = mu / n;
  }
  return table;
}

std::vector<double> confidence_scores(const ad::Matrix& features, const std::vector<int>& pids,
                                      const PrototypeTable& protos) {
  if (static_cast<Eigen::Index>(pids.size()) != features.rows()) {
    throw Error(ErrorKind::kLengthMismatch, "features and pids must align");
  }
  std::vector<double> d(pids.size());
  for (std::size_t i = 0; i < pids.size(); ++i) {
    auto it = protos.prototypes.find(pids[i]);
    if (it == protos.prototypes.end()) throw Error(ErrorKind::kMissingPrototype, "no prototype for a sample's pid");
    d[i] = 1.0 - features.row(static_cast<Eigen::Index>(i)).dot(it->second);
  }
  std::vector<double> u(d.size(), 1.0);
  if (d.empty()) return u;
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const double range = *hi - *lo;
  // Spreads at rounding level count as constant.
  if (range <= 1e-12) return u;
  for (std::size_t i = 0; i < d.size(); ++i) u[i] = 1.0 - (d[i] - *lo) / range;
  return u;
}

AlignmentWeights alignment_weights(const std::vector<double>& u, double epsilon, double gamma_u, WeightSide side) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kDomainError, "epsilon must be positive");
  AlignmentWeights w;
  w.side = side;
  w.weights.resize(u.size());
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    w.weights[i] = std::pow(u[i] + epsilon, gamma_u);
    total += w.weights[i];
  }
  for (double& x : w.weights) x /= total;
  return w;
}

AlignmentWeights uniform_weights(std::size_t n, WeightSide side) {
  return {std::vector<double>(n, 1.0 / static_cast<double>(n)), side};
}

double weighted_loss_aggregate(const std::vector<double>& losses, const AlignmentWeights& w) {
  if (losses.size() != w.weights.size()) throw Error(ErrorKind::kLengthMismatch, "losses and weights differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) total += w.weights[i] * losses[i];
  return total;
}

ad::Var weighted_loss_aggregate(const std::vector<ad::Var>& losses, const AlignmentWeights& w) {
  if (losses.size() != w.weights.size()) throw Error(ErrorKind::kLengthMismatch, "losses and weights differ in length");
  return ad::weighted_sum(losses, w.weights);
}

WeightStats weight_stats(const AlignmentWeights& w) {
  WeightStats s;
  if (w.weights.empty()) return s;
  const auto [lo, hi] = std::minmax_element(w.weights.begin(), w.weights.end());
  s.min = *lo;
  s.max = *hi;
  for (double x : w.weights)
    if (x > 0.0) s.entropy -= x * std::log(x);
  return s;
}

}  // namespace icon
