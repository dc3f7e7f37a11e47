#include <cmath>

#include "doctest.h"
#include "icon/error.hpp"
#include "icon/prototype_alignment.hpp"
#include "icon/rng.hpp"

using namespace icon;
using ad::Matrix;

namespace {

Matrix random_unit_rows(int n, int d, Rng& rng) {
  Matrix m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
    m.row(i) /= m.row(i).norm();
  }
  return m;
}

}  // namespace

TEST_CASE("prototypes of one or two identical members equal the member") {
  Rng rng(1);
  Matrix f = random_unit_rows(3, 5, rng);
  f.row(2) = f.row(1);
  const PrototypeTable t = compute_prototypes(f, {7, 9, 9});
  CHECK(t.prototypes.at(7) == f.row(0));
  CHECK((t.prototypes.at(9) - f.row(1)).norm() < 1e-15);
  CHECK(t.members.at(9) == std::vector<int>{1, 2});
}

TEST_CASE("two members at 60 degrees average to their normalized sum") {
  Matrix f(2, 2);
  f << 1.0, 0.0, 0.5, std::sqrt(3.0) / 2.0;
  const PrototypeTable t = compute_prototypes(f, {0, 0});
  const Eigen::RowVectorXd expect = (f.row(0) + f.row(1)) / (f.row(0) + f.row(1)).norm();
  CHECK((t.prototypes.at(0) - expect).norm() < 1e-15);
  CHECK(t.prototypes.at(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("antipodal members raise DegeneratePrototype") {
  Matrix f(2, 2);
  f << 1.0, 0.0, -1.0, 0.0;
  try {
    compute_prototypes(f, {3, 3});
    FAIL("expected DegeneratePrototype");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegeneratePrototype);
  }
}

TEST_CASE("prototypes are idempotent on per-identity constant features") {
  Rng rng(2);
  const Matrix base = random_unit_rows(3, 4, rng);
  const std::vector<int> pids{0, 1, 2, 0, 1, 2, 2};
  Matrix f(7, 4);
  for (int i = 0; i < 7; ++i) f.row(i) = base.row(pids[static_cast<std::size_t>(i)]);
  const PrototypeTable t = compute_prototypes(f, pids);
  for (int c = 0; c < 3; ++c) CHECK((t.prototypes.at(c) - base.row(c)).norm() < 1e-14);
}

TEST_CASE("confidence is 1 when every sample equals its prototype") {
  Rng rng(3);
  const Matrix f = random_unit_rows(4, 6, rng);
  const std::vector<int> pids{0, 1, 2, 3};
  for (double u : confidence_scores(f, pids, compute_prototypes(f, pids))) CHECK(u == 1.0);
}

TEST_CASE("deviations in ratio 0:1:2 map to confidences 1, 0.5, 0") {
  PrototypeTable t;
  t.prototypes[0] = Eigen::RowVectorXd::Unit(2, 0);
  t.members[0] = {0, 1, 2};
  Matrix f(3, 2);
  // d = 1 - cos: 0, 0.25, 0.5
  f << 1.0, 0.0, 0.75, std::sqrt(1 - 0.5625), 0.5, std::sqrt(0.75);
  const std::vector<double> u = confidence_scores(f, {0, 0, 0}, t);
  CHECK(u[0] == doctest::Approx(1.0));
  CHECK(u[1] == doctest::Approx(0.5));
  CHECK(u[2] == doctest::Approx(0.0));
  try {
    confidence_scores(f, {0, 0, 5}, t);
    FAIL("expected MissingPrototype");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingPrototype);
  }
}

TEST_CASE("random batches give confidences in [0, 1]") {
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const Matrix f = random_unit_rows(8, 5, rng);
    std::vector<int> pids;
    for (int i = 0; i < 8; ++i) pids.push_back(i % 3);
    for (double u : confidence_scores(f, pids, compute_prototypes(f, pids))) {
      CHECK(u >= 0.0);
      CHECK(u <= 1.0);
    }
  }
}

TEST_CASE("alignment weight examples") {
  const AlignmentWeights w = alignment_weights({1.0, 0.0}, 0.1, 1.0);
  CHECK(w.weights[0] == doctest::Approx(1.1 / 1.2));
  CHECK(w.weights[1] == doctest::Approx(0.1 / 1.2));
  const AlignmentWeights flat = alignment_weights({0.1, 0.9, 0.3, 0.0, 1.0, 0.5, 0.7, 0.2}, 0.05, 0.0);
  for (double x : flat.weights) CHECK(x == 0.125);
  CHECK(flat.weights == uniform_weights(8).weights);
}

TEST_CASE("weights sum to 1 and grow with confidence") {
  Rng rng(5);
  for (int k = 0; k < 500; ++k) {
    std::vector<double> u;
    const int n = static_cast<int>(rng.integer(1, 12));
    for (int i = 0; i < n; ++i) u.push_back(rng.uniform());
    const AlignmentWeights w = alignment_weights(u, 0.05, rng.uniform(0.01, 1.0), WeightSide::kText);
    CHECK(w.side == WeightSide::kText);
    double s = 0;
    for (double x : w.weights) {
      CHECK(x >= 0.0);
      s += x;
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (u[static_cast<std::size_t>(i)] > u[static_cast<std::size_t>(j)])
          CHECK(w.weights[static_cast<std::size_t>(i)] > w.weights[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("weighted aggregation examples and oracle") {
  const std::vector<double> losses{1.0, 2.0, 6.0};
  CHECK(weighted_loss_aggregate(losses, uniform_weights(3)) == doctest::Approx(3.0));
  CHECK(weighted_loss_aggregate(losses, AlignmentWeights{{0, 1, 0}, WeightSide::kImage}) == 2.0);
  CHECK_THROWS_AS(weighted_loss_aggregate(losses, uniform_weights(2)), Error);
  Rng rng(6);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> l, u;
    for (int i = 0; i < 9; ++i) l.push_back(rng.uniform(0, 10)), u.push_back(rng.uniform());
    const AlignmentWeights w = alignment_weights(u, 0.05, 0.5);
    double acc = 0;
    for (int i = 8; i >= 0; --i) acc += w.weights[static_cast<std::size_t>(i)] * l[static_cast<std::size_t>(i)];
    CHECK(std::abs(weighted_loss_aggregate(l, w) - acc) < 1e-12);
  }
}

TEST_CASE("weight statistics") {
  const WeightStats s = weight_stats(uniform_weights(4));
  CHECK(s.min == 0.25);
  CHECK(s.max == 0.25);
  CHECK(s.entropy == doctest::Approx(std::log(4.0)));
}
