#include "doctest.h"
#include "icon/error.hpp"
#include "icon/rng.hpp"
#include "icon/spatial_intervention.hpp"
#include "oracles.hpp"

using namespace icon;

namespace {
const ad::Matrix kUniform = ad::Matrix::Constant(32, 32, 1.0 / 32.0);
const BoundingBox kGt{20, 10, 16, 40};
}  // namespace

TEST_CASE("attention mass of gt is 1 and of a disjoint region is 0") {
  Rng rng(1);
  const ad::Matrix a = oracle::random_stochastic(32, 32, rng);
  CHECK(attention_mass(a, 8, 4, kGt, kGt) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(attention_mass(a, 8, 4, {100, 100, 5, 5}, kGt) == 0.0);
}

TEST_CASE("uniform attention over the left half of the token centers gives mass 0.5") {
  const BoundingBox left{kGt.x, kGt.y, kGt.w / 2, kGt.h};
  CHECK(std::abs(attention_mass(kUniform, 8, 4, left, kGt) - 0.5) <= 1.0 / 32.0);
  CHECK(std::abs(semantic_info_loss(kUniform, 8, 4, kGt, left) - 0.5) <= 1.0 / 32.0);
}

TEST_CASE("semantic information loss bounds") {
  Rng rng(2);
  const ad::Matrix a = oracle::random_stochastic(32, 32, rng);
  CHECK(semantic_info_loss(a, 8, 4, kGt, kGt) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(semantic_info_loss(a, 8, 4, kGt, {90, 80, 4, 4}) == 1.0);
}

TEST_CASE("s_adv does not increase as the candidate grows over gt under uniform attention") {
  double prev = 1.0;
  for (double w = 1; w <= kGt.w; w += 1) {
    const double s = semantic_info_loss(kUniform, 8, 4, kGt, {kGt.x, kGt.y, w, kGt.h});
    CHECK(s <= prev);
    prev = s;
  }
  CHECK(prev == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("geometric realism examples") {
  const InterventionConfig cfg;
  CHECK(geometric_realism(kGt, kGt, cfg) == 0.0);  // iou window ends below 1
  CHECK(geometric_realism({200, 200, 5, 5}, kGt, cfg) == 0.0);
  InterventionConfig peaked = cfg;
  // gt 16x40; a candidate of width 16*0.6 at the same place has iou 0.6 and visibility 0.6.
  peaked.vis_window = {0.3, 0.6, 1.01};
  CHECK(geometric_realism({kGt.x, kGt.y, kGt.w * 0.6, kGt.h}, kGt, peaked) == doctest::Approx(1.0));
  InterventionConfig prod = cfg;
  prod.fuzzy_and = FuzzyAnd::kProduct;
  const BoundingBox c{kGt.x + 3, kGt.y + 5, kGt.w, kGt.h};
  const double m_iou = triangular_membership(iou(c, kGt), cfg.iou_window);
  const double m_vis = triangular_membership(visibility(c, kGt), cfg.vis_window);
  CHECK(geometric_realism(c, kGt, prod) == doctest::Approx(m_iou * m_vis));
  CHECK(geometric_realism(c, kGt, cfg) == doctest::Approx(std::min(m_iou, m_vis)));
}

TEST_CASE("curriculum stability gate") {
  const InterventionConfig cfg;  // warm-up 2, tau 16
  const BoundingBox big{0, 0, 20, 40}, small{0, 0, 16, 40};
  CHECK(curriculum_stability(0, big, cfg) == 0.0);
  CHECK(curriculum_stability(1, big, cfg) == 0.5);
  CHECK(curriculum_stability(2, big, cfg) == 1.0);
  CHECK(curriculum_stability(7, big, cfg) == 1.0);
  CHECK(curriculum_stability(7, small, cfg) == 0.0);
  double prev = 0.0;
  for (double t = 0; t < 5; t += 0.1) {
    const double s = curriculum_stability(t, big, cfg);
    CHECK(s >= prev);
    prev = s;
  }
}

TEST_CASE("ratio-based scores are invariant to doubling all coordinates") {
  Rng rng(3);
  const InterventionConfig cfg;
  const ad::Matrix a = oracle::random_stochastic(32, 32, rng);
  for (int k = 0; k < 200; ++k) {
    const BoundingBox gt{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(5, 30), rng.uniform(5, 40)};
    const BoundingBox c{gt.x + rng.uniform(-8, 8), gt.y + rng.uniform(-8, 8), gt.w * rng.uniform(0.6, 1.4),
                        gt.h * rng.uniform(0.6, 1.4)};
    auto twice = [](const BoundingBox& b) { return BoundingBox{2 * b.x, 2 * b.y, 2 * b.w, 2 * b.h}; };
    CHECK(semantic_info_loss(a, 8, 4, twice(gt), twice(c)) == doctest::Approx(semantic_info_loss(a, 8, 4, gt, c)));
    CHECK(geometric_realism(twice(c), twice(gt), cfg) == doctest::Approx(geometric_realism(c, gt, cfg)));
  }
}

TEST_CASE("select_intervention returns gt while s_stab is zero") {
  const InterventionConfig cfg;
  const BoundingBox gt{30, 20, 20, 40};
  const CandidatePool pool = generate_candidate_pool(gt, cfg.shift_fracs, cfg.scale_facs, {128, 96});
  const ScoredCandidate s = select_intervention(pool, kUniform, 8, 4, gt, 0.0, cfg);
  CHECK(s.box == gt);
  CHECK(s.index == -1);
  CHECK(s.j == 0.0);
  const BoundingBox tiny{30, 20, 10, 20};
  const CandidatePool tiny_pool = generate_candidate_pool(tiny, cfg.shift_fracs, cfg.scale_facs, {128, 96});
  CHECK(select_intervention(tiny_pool, kUniform, 8, 4, tiny, 10.0, cfg).box == tiny);
}

TEST_CASE("a pool holding only gt returns gt with j = s_stab * alpha_geo * s_geo") {
  InterventionConfig cfg;
  cfg.iou_window = {0.3, 0.6, 1.2};
  const BoundingBox gt{30, 20, 20, 40};
  const CandidatePool pool{gt, {gt}};
  const ScoredCandidate s = select_intervention(pool, kUniform, 8, 4, gt, 1.0, cfg);
  CHECK(s.box == gt);
  CHECK(s.j == doctest::Approx(0.5 * cfg.alpha_geo * geometric_realism(gt, gt, cfg)));
}

TEST_CASE("select_intervention matches brute force on random pools") {
  Rng rng(4);
  const InterventionConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    const ad::Matrix a = oracle::random_stochastic(32, 32, rng);
    const BoundingBox gt{rng.uniform(0, 60), rng.uniform(0, 40), rng.uniform(17, 40), rng.uniform(17, 50)};
    CandidatePool pool{gt, {}};
    for (int k = 0; k < 150; ++k)
      pool.candidates.push_back({gt.x + rng.uniform(-10, 10), gt.y + rng.uniform(-10, 10), gt.w * rng.uniform(0.5, 1.5),
                                 gt.h * rng.uniform(0.5, 1.5)});
    const double t = rng.uniform(0.1, 3.0);
    int best = -1;
    double best_j = 0;
    for (std::size_t k = 0; k < pool.candidates.size(); ++k) {
      const BoundingBox& c = pool.candidates[k];
      const oracle::Box oc{c.x, c.y, c.w, c.h}, og{gt.x, gt.y, gt.w, gt.h};
      const double s_adv = 1.0 - oracle::mass_in(a, 8, 4, oc, og);
      const double s_geo = std::min(oracle::triangle(oracle::iou(oc, og), 0.3, 0.6, 0.95),
                                    oracle::triangle(oracle::visibility(oc, og), 0.4, 0.7, 1.01));
      const double j = std::min(1.0, t / 2.0) * (0.5 * s_adv + 0.5 * s_geo);
      if (best < 0 || j > best_j) {
        best = static_cast<int>(k);
        best_j = j;
      }
    }
    const ScoredCandidate s = select_intervention(pool, a, 8, 4, gt, t, cfg);
    CHECK(s.index == best);
    CHECK(s.box == pool.candidates[static_cast<std::size_t>(best)]);
  }
}

TEST_CASE("empty pools and malformed configs are rejected") {
  const InterventionConfig cfg;
  CHECK_THROWS_AS(select_intervention({kGt, {}}, kUniform, 8, 4, kGt, 1.0, cfg), Error);
  InterventionConfig bad = cfg;
  bad.iou_window = {0.6, 0.6, 0.9};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.alpha_adv = 0.9;
  CHECK_THROWS_AS(bad.validate(), Error);
}
