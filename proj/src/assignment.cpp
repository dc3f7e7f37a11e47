#include "icon/assignment.hpp"

#include <cmath>
#include <limits>

#include "icon/error.hpp"

namespace icon {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Replaces forbidden (+inf) entries by a finite penalty larger than any
// feasible total, so the potentials stay finite.
Eigen::MatrixXd finite_costs(const Eigen::MatrixXd& cost, double* penalty) {
  double finite_sum = 0.0;
  for (Eigen::Index i = 0; i < cost.size(); ++i) {
    const double c = cost.data()[i];
    if (std::isfinite(c)) finite_sum += std::abs(c);
  }
  *penalty = 2.0 * finite_sum + 1.0;
  Eigen::MatrixXd out = cost;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out.data()[i])) out.data()[i] = *penalty;
  }
  return out;
}

// 1-indexed potentials formulation (rows = workers, cols = jobs).
std::vector<int> hungarian(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double total(const Eigen::MatrixXd& cost, const std::vector<int>& perm) {
  double s = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) s += cost(static_cast<Eigen::Index>(i), perm[i]);
  return s;
}

}  // namespace

AssignmentResult solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols() || cost.rows() == 0) {
    throw Error(ErrorKind::kShapeMismatch, "assignment needs a non-empty square cost matrix");
  }
  double penalty = 0.0;
  const Eigen::MatrixXd finite = finite_costs(cost, &penalty);
  AssignmentResult r;
  r.row_to_col = hungarian(finite);
  r.cost = total(cost, r.row_to_col);
  return r;
}

AssignmentResult solve_assignment_lexicographic(const Eigen::MatrixXd& cost, double tie_tolerance) {
  const AssignmentResult best = solve_assignment(cost);
  if (!std::isfinite(best.cost)) throw Error(ErrorKind::kDomainError, "no feasible assignment exists");
  const Eigen::Index n = cost.rows();
  const double tol = tie_tolerance * std::max(1.0, std::abs(best.cost));

  // Fix rows in order to the smallest column that still admits an optimal completion.
  std::vector<int> fixed;
  std::vector<char> col_used(static_cast<std::size_t>(n), 0);
  double prefix = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    bool placed = false;
    for (Eigen::Index j = 0; j < n && !placed; ++j) {
      if (col_used[static_cast<std::size_t>(j)] || !std::isfinite(cost(i, j))) continue;
      double rest = 0.0;
      const Eigen::Index m = n - i - 1;
      if (m > 0) {
        std::vector<Eigen::Index> free_cols;
        for (Eigen::Index c = 0; c < n; ++c)
          if (!col_used[static_cast<std::size_t>(c)] && c != j) free_cols.push_back(c);
        Eigen::MatrixXd sub(m, m);
        for (Eigen::Index r = 0; r < m; ++r)
          for (Eigen::Index c = 0; c < m; ++c) sub(r, c) = cost(i + 1 + r, free_cols[static_cast<std::size_t>(c)]);
        rest = solve_assignment(sub).cost;
      }
      if (prefix + cost(i, j) + rest <= best.cost + tol) {
        fixed.push_back(static_cast<int>(j));
        col_used[static_cast<std::size_t>(j)] = 1;
        prefix += cost(i, j);
        placed = true;
      }
    }
    if (!placed) return best;  // numerical corner case: fall back to the plain optimum
  }
  return {fixed, total(cost, fixed)};
}

}  // namespace icon
