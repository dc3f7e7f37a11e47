#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

// Minimal reverse-mode automatic differentiation over dense double matrices.
// Every op builds a node holding its value and a closure that pushes the
// node's gradient into its parents; backward() runs the closures in reverse
// topological order.
namespace icon::ad {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix value;
  Matrix grad;  // allocated lazily, only for nodes that require grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Matrix value);
  static Var parameter(Matrix value);

  const Matrix& value() const { return node_->value; }
  // Mutable access for optimizers and finite-difference probes.
  Matrix& mutable_value() const { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() > 0; }
  void zero_grad() const { node_->grad.resize(0, 0); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Seeds d(root)/d(root) = 1 for a 1×1 root and propagates.
void backward(const Var& root);

Var detach(const Var& a);

Var matmul(const Var& a, const Var& b);
Var matmul_transposed(const Var& a, const Var& b);  // a · bᵀ
Var transpose(const Var& a);
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// Adds a 1×n row to every row of a (m×n).
Var add_row(const Var& a, const Var& row);
// Multiplies row i of a by the constant factors(i).
Var scale_rows(const Var& a, const Eigen::VectorXd& factors);

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);
Var gelu(const Var& a);
Var square(const Var& a);

Var sum(const Var& a);         // 1×1
Var mean(const Var& a);        // 1×1
Var mean_rows(const Var& a);   // 1×n: average over rows
Var l2_normalize_rows(const Var& a, double eps = 1e-12);

Var row(const Var& a, Eigen::Index i);
Var gather_rows(const Var& a, const std::vector<int>& indices);
Var cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var element(const Var& a, Eigen::Index r, Eigen::Index c);  // 1×1
Var hconcat(const std::vector<Var>& parts);
Var vconcat(const std::vector<Var>& parts);

// Σ_i parts_i · weights_i for 1×1 parts.
Var weighted_sum(const std::vector<Var>& parts, const std::vector<double>& weights);

}  // namespace icon::ad
