#include "icon/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "icon/error.hpp"

namespace icon::ad {
namespace {

thread_local bool g_grad_enabled = true;

using Backward = std::function<void(Node&)>;

Var make(Matrix value, std::vector<Var> parents, Backward fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      for (Var& p : parents) node->parents.push_back(p.node());
      node->backward = std::move(fn);
    }
  }
  return Var(std::move(node));
}

void push(Node& parent, const Matrix& g) {
  if (parent.requires_grad) parent.accumulate(g);
}

template <typename Expr>
void push(Node& parent, const Eigen::MatrixBase<Expr>& g) {
  if (parent.requires_grad) parent.accumulate(Matrix(g));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::kShapeMismatch, std::string(op) + ": operand shapes differ");
  }
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var Var::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->accumulate(Matrix::Ones(root.rows(), root.cols()));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() > 0) n->backward(*n);
  }
}

Var detach(const Var& a) { return Var::constant(a.value()); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::kShapeMismatch, "matmul: inner dimensions differ");
  return make(a.value() * b.value(), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * n.grad);
  });
}

Var matmul_transposed(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "matmul_transposed: column counts differ");
  }
  return make(a.value() * b.value().transpose(), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value);
    if (pb.requires_grad) pb.accumulate(n.grad.transpose() * pa.value);
  });
}

Var transpose(const Var& a) {
  return make(a.value().transpose(), {a}, [](Node& n) { push(*n.parents[0], n.grad.transpose()); });
}

Var operator+(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a, b}, [](Node& n) {
    push(*n.parents[0], n.grad);
    push(*n.parents[1], n.grad);
  });
}

Var operator-(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a, b}, [](Node& n) {
    push(*n.parents[0], n.grad);
    push(*n.parents[1], -n.grad);
  });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a, b, "hadamard");
  return make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) pa.accumulate(n.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(n.grad.cwiseProduct(pa.value));
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a}, [s](Node& n) { push(*n.parents[0], n.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  return make(a.value().array() + s, {a}, [](Node& n) { push(*n.parents[0], n.grad); });
}

Var add_row(const Var& a, const Var& r) {
  if (r.rows() != 1 || r.cols() != a.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "add_row: row vector width differs");
  }
  Matrix v = a.value().rowwise() + r.value().row(0);
  return make(std::move(v), {a, r}, [](Node& n) {
    push(*n.parents[0], n.grad);
    push(*n.parents[1], n.grad.colwise().sum());
  });
}

Var scale_rows(const Var& a, const Eigen::VectorXd& f) {
  if (f.size() != a.rows()) throw Error(ErrorKind::kShapeMismatch, "scale_rows: factor count differs");
  Matrix v = f.asDiagonal() * a.value();
  return make(std::move(v), {a}, [f](Node& n) { push(*n.parents[0], f.asDiagonal() * n.grad); });
}

Var softmax_rows(const Var& a) {
  Matrix s = a.value();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp();
    s.row(i) /= s.row(i).sum();
  }
  return make(s, {a}, [s](Node& n) {
    const Eigen::VectorXd dot = (n.grad.cwiseProduct(s)).rowwise().sum();
    Matrix g = s.cwiseProduct(n.grad.colwise() - dot);
    push(*n.parents[0], g);
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix out = a.value();
  Matrix soft(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double mx = out.row(i).maxCoeff();
    const double lse = mx + std::log((out.row(i).array() - mx).exp().sum());
    out.row(i).array() -= lse;
    soft.row(i) = out.row(i).array().exp();
  }
  return make(std::move(out), {a}, [soft](Node& n) {
    const Eigen::VectorXd total = n.grad.rowwise().sum();
    Matrix g = n.grad - soft.cwiseProduct(total.replicate(1, soft.cols()));
    push(*n.parents[0], g);
  });
}

Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index m = a.rows(), d = a.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw Error(ErrorKind::kShapeMismatch, "layer_norm_rows: gain/bias width differs");
  }
  Matrix xhat(m, d);
  Eigen::VectorXd inv_std(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mu = a.value().row(i).mean();
    const Eigen::RowVectorXd c = a.value().row(i).array() - mu;
    const double var = c.squaredNorm() / static_cast<double>(d);
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = c * inv_std(i);
  }
  Matrix y = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  y.rowwise() += bias.value().row(0);
  return make(std::move(y), {a, gain, bias}, [xhat, inv_std](Node& n) {
    Node& px = *n.parents[0];
    Node& pg = *n.parents[1];
    Node& pb = *n.parents[2];
    if (pg.requires_grad) pg.accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
    if (pb.requires_grad) pb.accumulate(n.grad.colwise().sum());
    if (px.requires_grad) {
      const Matrix dxhat = (n.grad.array().rowwise() * pg.value.row(0).array()).matrix();
      const auto d = static_cast<double>(xhat.cols());
      Matrix dx(xhat.rows(), xhat.cols());
      for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
        const double m1 = dxhat.row(i).sum() / d;
        const double m2 = dxhat.row(i).dot(xhat.row(i)) / d;
        dx.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2).matrix();
      }
      px.accumulate(dx);
    }
  });
}

Var gelu(const Var& a) {
  static constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  static constexpr double c = 0.044715;
  const Matrix& x = a.value();
  const Matrix t = (k * (x.array() + c * x.array().cube())).tanh().matrix();
  Matrix y = (0.5 * x.array() * (1.0 + t.array())).matrix();
  return make(std::move(y), {a}, [x, t](Node& n) {
    const auto dt = (1.0 - t.array().square()) * k * (1.0 + 3.0 * c * x.array().square());
    Matrix g = (n.grad.array() * (0.5 * (1.0 + t.array()) + 0.5 * x.array() * dt)).matrix();
    push(*n.parents[0], g);
  });
}

Var square(const Var& a) {
  return make(a.value().array().square().matrix(), {a},
              [](Node& n) { push(*n.parents[0], 2.0 * n.grad.cwiseProduct(n.parents[0]->value)); });
}

Var sum(const Var& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return make(std::move(v), {a}, [](Node& n) {
    const Node& p = *n.parents[0];
    push(*n.parents[0], Matrix::Constant(p.value.rows(), p.value.cols(), n.grad(0, 0)));
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean_rows(const Var& a) {
  const auto m = static_cast<double>(a.rows());
  Matrix v = a.value().colwise().sum() / m;
  return make(std::move(v), {a}, [m](Node& n) {
    const Node& p = *n.parents[0];
    push(*n.parents[0], (n.grad / m).replicate(p.value.rows(), 1));
  });
}

Var l2_normalize_rows(const Var& a, double eps) {
  const Eigen::VectorXd norms = (a.value().rowwise().squaredNorm().array() + eps).sqrt().matrix();
  Matrix y = norms.cwiseInverse().asDiagonal() * a.value();
  return make(y, {a}, [y, norms](Node& n) {
    const Eigen::VectorXd dot = n.grad.cwiseProduct(y).rowwise().sum();
    Matrix g = norms.cwiseInverse().asDiagonal() * (n.grad - dot.asDiagonal() * y);
    push(*n.parents[0], g);
  });
}

Var row(const Var& a, Eigen::Index i) { return gather_rows(a, {static_cast<int>(i)}); }

Var gather_rows(const Var& a, const std::vector<int>& idx) {
  Matrix v(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= a.rows()) throw Error(ErrorKind::kShapeMismatch, "gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(k)) = a.value().row(idx[k]);
  }
  return make(std::move(v), {a}, [idx](Node& n) {
    Node& p = *n.parents[0];
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) g.row(idx[k]) += n.grad.row(static_cast<Eigen::Index>(k));
    push(p, g);
  });
}

Var cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.cols()) throw Error(ErrorKind::kShapeMismatch, "cols: range out of bounds");
  return make(a.value().middleCols(start, count), {a}, [start, count](Node& n) {
    Node& p = *n.parents[0];
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    g.middleCols(start, count) = n.grad;
    push(p, g);
  });
}

Var element(const Var& a, Eigen::Index r, Eigen::Index c) {
  Matrix v(1, 1);
  v(0, 0) = a.value()(r, c);
  return make(std::move(v), {a}, [r, c](Node& n) {
    Node& p = *n.parents[0];
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    g(r, c) = n.grad(0, 0);
    push(p, g);
  });
}

Var hconcat(const std::vector<Var>& parts) {
  Eigen::Index rows = parts.at(0).rows(), total = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw Error(ErrorKind::kShapeMismatch, "hconcat: row counts differ");
    total += p.cols();
  }
  Matrix v(rows, total);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  return make(std::move(v), parts, [offsets](Node& n) {
    for (std::size_t k = 0; k < n.parents.size(); ++k) {
      Node& p = *n.parents[k];
      if (p.requires_grad) p.accumulate(n.grad.middleCols(offsets[k], p.value.cols()));
    }
  });
}

Var vconcat(const std::vector<Var>& parts) {
  Eigen::Index cols = parts.at(0).cols(), total = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw Error(ErrorKind::kShapeMismatch, "vconcat: column counts differ");
    total += p.rows();
  }
  Matrix v(total, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  return make(std::move(v), parts, [offsets](Node& n) {
    for (std::size_t k = 0; k < n.parents.size(); ++k) {
      Node& p = *n.parents[k];
      if (p.requires_grad) p.accumulate(n.grad.middleRows(offsets[k], p.value.rows()));
    }
  });
}

Var weighted_sum(const std::vector<Var>& parts, const std::vector<double>& weights) {
  if (parts.size() != weights.size()) throw Error(ErrorKind::kLengthMismatch, "weighted_sum: lengths differ");
  Matrix v = Matrix::Zero(1, 1);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (parts[k].rows() != 1 || parts[k].cols() != 1) {
      throw Error(ErrorKind::kShapeMismatch, "weighted_sum: parts must be scalars");
    }
    v(0, 0) += weights[k] * parts[k].scalar();
  }
  return make(std::move(v), parts, [weights](Node& n) {
    for (std::size_t k = 0; k < n.parents.size(); ++k) {
      Node& p = *n.parents[k];
      if (p.requires_grad) p.accumulate(Matrix::Constant(1, 1, weights[k] * n.grad(0, 0)));
    }
  });
}

}  // namespace icon::ad
