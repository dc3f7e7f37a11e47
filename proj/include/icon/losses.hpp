#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "icon/autodiff.hpp"

namespace icon {

// Lookup table of labeled identity features plus a FIFO queue of unlabeled
// (distractor) features, as used by the online instance matching loss.
class OimState {
 public:
  OimState(int num_identities, int embed_dim, int queue_size, double sigma, double momentum,
           std::uint64_t seed);

  int num_identities() const { return static_cast<int>(lut_.rows()); }
  int queue_size() const { return static_cast<int>(queue_.rows()); }
  double sigma() const { return sigma_; }
  double momentum() const { return momentum_; }
  const ad::Matrix& lookup_table() const { return lut_; }
  const ad::Matrix& queue() const { return queue_; }
  ad::Matrix& mutable_lookup_table() { return lut_; }

  // LUT row pid <- normalize(momentum · row + (1 − momentum) · embedding). Throws UnknownPid.
  void update(int pid, const Eigen::RowVectorXd& embedding);
  void push_unlabeled(const Eigen::RowVectorXd& embedding);
  // Queue contents from oldest to newest.
  std::vector<Eigen::RowVectorXd> queue_in_order() const;

 private:
  ad::Matrix lut_;
  ad::Matrix queue_;
  int head_ = 0;  // next slot to overwrite (== oldest entry)
  double sigma_;
  double momentum_;
};

// Cross-entropy of concat(LUT·e, queue·e)/σ against the pid's LUT row. The
// state is read only; call OimState::update afterwards. Throws UnknownPid.
ad::Var oim_loss(const ad::Var& embedding, int pid, const OimState& state);

// Bidirectional KL between softmax similarity distributions and
// uniform-over-same-pid targets. Image anchor i is weighted by w_img[i] and text
// anchor j by w_txt[j]; empty weight vectors mean uniform 1/N. Throws NoPositive
// / LengthMismatch.
ad::Var sdm_loss(const ad::Var& image_embeddings, const ad::Var& text_embeddings, const std::vector<int>& pids,
                 const std::vector<double>& w_img, const std::vector<double>& w_txt, double temperature);

struct LossWeights {
  double sdm = 1.0;
  double oim = 1.0;
  double reg = 0.5;
  double cf = 0.5;
};

struct LossComponents {
  ad::Var sdm, oim, reg, cf;  // unset components count as 0
};

// λ_sdm·L_sdm + λ_oim·L_oim + λ_reg·L_reg + λ_cf·L_cf. Throws NonFiniteLoss.
ad::Var total_loss(const LossComponents& components, const LossWeights& lambdas);
double total_loss(const std::map<std::string, double>& components, const LossWeights& lambdas);

}  // namespace icon
