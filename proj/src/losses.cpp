#include "icon/losses.hpp"

#include <cmath>

#include "icon/error.hpp"
#include "icon/rng.hpp"

namespace icon {

using ad::Matrix;
using ad::Var;

OimState::OimState(int num_identities, int embed_dim, int queue_size, double sigma, double momentum,
                   std::uint64_t seed)
    : lut_(num_identities, embed_dim), queue_(Matrix::Zero(queue_size, embed_dim)), sigma_(sigma), momentum_(momentum) {
  if (num_identities < 1 || embed_dim < 1 || queue_size < 0) {
    throw Error(ErrorKind::kConfigError, "invalid OIM state dimensions");
  }
  if (!(sigma > 0.0) || momentum < 0.0 || momentum > 1.0) {
    throw Error(ErrorKind::kConfigError, "OIM needs sigma > 0 and momentum in [0, 1]");
  }
  Rng rng(derive_seed(seed, {0x6f696dULL}));
  for (int i = 0; i < num_identities; ++i) {
    for (int j = 0; j < embed_dim; ++j) lut_(i, j) = rng.normal();
    lut_.row(i).normalize();
  }
}

void OimState::update(int pid, const Eigen::RowVectorXd& e) {
  if (pid < 0 || pid >= lut_.rows()) throw Error(ErrorKind::kUnknownPid, "pid outside the lookup table");
  Eigen::RowVectorXd r = momentum_ * lut_.row(pid) + (1.0 - momentum_) * e;
  const double n = r.norm();
  // Antipodal update: keep the incoming direction.
  lut_.row(pid) = n > 1e-12 ? Eigen::RowVectorXd(r / n) : Eigen::RowVectorXd(e.normalized());
}

void OimState::push_unlabeled(const Eigen::RowVectorXd& e) {
  if (queue_.rows() == 0) return;
  queue_.row(head_) = e;
  head_ = (head_ + 1) % static_cast<int>(queue_.rows());
}

std::vector<Eigen::RowVectorXd> OimState::queue_in_order() const {
  std::vector<Eigen::RowVectorXd> out;
  for (int k = 0; k < queue_.rows(); ++k) out.emplace_back(queue_.row((head_ + k) % queue_.rows()));
  return out;
}

Var oim_loss(const Var& embedding, int pid, const OimState& state) {
  if (pid < 0 || pid >= state.num_identities()) throw Error(ErrorKind::kUnknownPid, "pid outside the lookup table");
  Matrix bank(state.num_identities() + state.queue_size(), state.lookup_table().cols());
  bank.topRows(state.num_identities()) = state.lookup_table();
  bank.bottomRows(state.queue_size()) = state.queue();
  const Var logits = ad::scale(ad::matmul_transposed(embedding, Var::constant(std::move(bank))), 1.0 / state.sigma());
  return ad::scale(ad::element(ad::log_softmax_rows(logits), 0, pid), -1.0);
}

Var sdm_loss(const Var& img, const Var& txt, const std::vector<int>& pids, const std::vector<double>& w_img,
             const std::vector<double>& w_txt, double temperature) {
  const auto n = static_cast<std::size_t>(img.rows());
  if (txt.rows() != img.rows() || pids.size() != n) {
    throw Error(ErrorKind::kLengthMismatch, "sdm_loss: embeddings and pids must align");
  }
  if ((!w_img.empty() && w_img.size() != n) || (!w_txt.empty() && w_txt.size() != n)) {
    throw Error(ErrorKind::kLengthMismatch, "sdm_loss: weight vector length differs from batch");
  }
  Matrix target(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    int count = 0;
    for (std::size_t j = 0; j < n; ++j) count += pids[i] == pids[j];
    if (count == 0) throw Error(ErrorKind::kNoPositive, "sdm_loss: anchor without a positive");
    for (std::size_t j = 0; j < n; ++j) {
      target(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pids[i] == pids[j] ? 1.0 / count : 0.0;
    }
  }
  // Σ_j q log q is a constant offset that makes each term a true KL divergence.
  Eigen::VectorXd entropy_term = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < target.rows(); ++i)
    for (Eigen::Index j = 0; j < target.cols(); ++j)
      if (target(i, j) > 0.0) entropy_term(i) += target(i, j) * std::log(target(i, j));

  const double uniform = 1.0 / static_cast<double>(n);
  auto direction = [&](const Var& logits, const std::vector<double>& w) {
    // Per-anchor KL(q_i || p_i) = Σ_j q_ij log q_ij − Σ_j q_ij log p_ij.
    const Var cross = ad::hadamard(Var::constant(target), ad::log_softmax_rows(logits));
    std::vector<Var> terms;
    std::vector<double> weights;
    for (std::size_t i = 0; i < n; ++i) {
      const Var row_sum = ad::sum(ad::row(cross, static_cast<Eigen::Index>(i)));
      terms.push_back(ad::add_scalar(ad::scale(row_sum, -1.0), entropy_term(static_cast<Eigen::Index>(i))));
      weights.push_back(w.empty() ? uniform : w[i]);
    }
    return ad::weighted_sum(terms, weights);
  };
  const Var sims = ad::scale(ad::matmul_transposed(img, txt), 1.0 / temperature);
  // pids are symmetric, so the same target serves the text→image direction.
  return direction(sims, w_img) + direction(ad::transpose(sims), w_txt);
}

Var total_loss(const LossComponents& c, const LossWeights& l) {
  std::vector<Var> parts;
  std::vector<double> weights;
  auto add = [&](const Var& v, double w) {
    if (!v) return;
    if (!std::isfinite(v.scalar())) throw Error(ErrorKind::kNonFiniteLoss, "loss component is not finite");
    parts.push_back(v);
    weights.push_back(w);
  };
  add(c.sdm, l.sdm);
  add(c.oim, l.oim);
  add(c.reg, l.reg);
  add(c.cf, l.cf);
  if (parts.empty()) return Var::constant(Matrix::Zero(1, 1));
  const Var total = ad::weighted_sum(parts, weights);
  if (!std::isfinite(total.scalar())) throw Error(ErrorKind::kNonFiniteLoss, "total loss is not finite");
  return total;
}

double total_loss(const std::map<std::string, double>& c, const LossWeights& l) {
  const std::map<std::string, double> lambdas = {{"sdm", l.sdm}, {"oim", l.oim}, {"reg", l.reg}, {"cf", l.cf}};
  double total = 0.0;
  for (const auto& [name, value] : c) {
    if (!std::isfinite(value)) throw Error(ErrorKind::kNonFiniteLoss, "loss component '" + name + "' is not finite");
    auto it = lambdas.find(name);
    if (it == lambdas.end()) throw Error(ErrorKind::kConfigError, "unknown loss component '" + name + "'");
    total += it->second * value;
  }
  if (!std::isfinite(total)) throw Error(ErrorKind::kNonFiniteLoss, "total loss is not finite");
  return total;
}

}  // namespace icon
