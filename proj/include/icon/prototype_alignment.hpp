#pragma once

#include <map>
#include <vector>

#include "icon/autodiff.hpp"

namespace icon {

struct PrototypeTable {
  std::map<int, Eigen::RowVectorXd> prototypes;  // identity -> unit-norm μ_c
  std::map<int, std::vector<int>> members;       // identity -> sample indices 𝒮_c
};

// Rows of `features` are unit-norm samples. Throws DegeneratePrototype /
// LengthMismatch.
PrototypeTable compute_prototypes(const ad::Matrix& features, const std::vector<int>& pids);

// d_i = 1 − ⟨f_i, μ_pid(i)⟩, min-max normalized over the batch (constant d → 0),
// u_i = 1 − d̂_i. Throws MissingPrototype.
std::vector<double> confidence_scores(const ad::Matrix& features, const std::vector<int>& pids,
                                      const PrototypeTable& protos);

enum class WeightSide { kImage, kText };

struct AlignmentWeights {
  std::vector<double> weights;
  WeightSide side = WeightSide::kImage;
};

// w_i = (u_i + ε)^γ / Σ_j (u_j + ε)^γ.
AlignmentWeights alignment_weights(const std::vector<double>& u, double epsilon, double gamma_u,
                                   WeightSide side = WeightSide::kImage);

AlignmentWeights uniform_weights(std::size_t n, WeightSide side = WeightSide::kImage);

// Σ_i w_i · loss_i. Throws LengthMismatch.
double weighted_loss_aggregate(const std::vector<double>& per_sample_losses, const AlignmentWeights& w);
ad::Var weighted_loss_aggregate(const std::vector<ad::Var>& per_sample_losses, const AlignmentWeights& w);

struct WeightStats {
  double min = 0.0;
  double max = 0.0;
  double entropy = 0.0;
};

WeightStats weight_stats(const AlignmentWeights& w);

}  // namespace icon
