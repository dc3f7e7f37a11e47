#pragma once

#include <span>
#include <vector>

namespace icon {

// Axis-aligned box in pixel units; (x, y) is the top-left corner.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Lexicographic (x, y, w, h) ordering, used for deterministic tie-breaks.
bool box_less(const BoundingBox& a, const BoundingBox& b);

struct ImageBounds {
  double width = 0.0;
  double height = 0.0;
};

double intersection_area(const BoundingBox& a, const BoundingBox& b);

// Overlapping region of two boxes; w or h is 0 when they do not overlap.
BoundingBox intersect(const BoundingBox& a, const BoundingBox& b);

double iou(const BoundingBox& a, const BoundingBox& b);

// Fraction of the ground-truth box covered by the candidate.
double visibility(const BoundingBox& candidate, const BoundingBox& gt);

// Triangular fuzzy window (lo, peak, hi). Throws DomainError unless lo < peak < hi.
struct TriangularWindow {
  double lo = 0.0;
  double peak = 0.5;
  double hi = 1.0;
};

double triangular_membership(double x, double lo, double peak, double hi);
inline double triangular_membership(double x, const TriangularWindow& win) {
  return triangular_membership(x, win.lo, win.peak, win.hi);
}

BoundingBox clip_box(const BoundingBox& box, const ImageBounds& bounds);

struct CandidatePool {
  BoundingBox gt;
  std::vector<BoundingBox> candidates;
};

// Cartesian product shift_x × shift_y × scale_w × scale_h applied to gt (scaling
// about the box center, shifts as fractions of gt's w/h), clipped to bounds,
// with degenerate results and exact duplicates dropped. Order is the product
// order with the first occurrence kept. Throws EmptyPool.
CandidatePool generate_candidate_pool(const BoundingBox& gt, std::span<const double> shift_fracs,
                                      std::span<const double> scale_facs,
                                      const ImageBounds& bounds);

}  // namespace icon
