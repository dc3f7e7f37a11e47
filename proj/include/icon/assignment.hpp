#pragma once

#include <Eigen/Dense>
#include <vector>

namespace icon {

// Linear assignment: rows to columns of a square cost matrix, minimizing the
// summed cost. Entries equal to +inf are forbidden.
struct AssignmentResult {
  std::vector<int> row_to_col;
  double cost = 0.0;
};

// Hungarian method with potentials, O(n^3). Returns an optimal assignment.
AssignmentResult solve_assignment(const Eigen::MatrixXd& cost);

// Among all optimal assignments (within `tie_tolerance` of the optimum) returns
// the lexicographically smallest row_to_col vector.
AssignmentResult solve_assignment_lexicographic(const Eigen::MatrixXd& cost, double tie_tolerance = 1e-9);

}  // namespace icon
