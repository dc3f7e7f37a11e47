#include "icon/geometry.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "icon/error.hpp"

namespace icon {

bool box_less(const BoundingBox& a, const BoundingBox& b) {
  return std::tie(a.x, a.y, a.w, a.h) < std::tie(b.x, b.y, b.w, b.h);
}

BoundingBox intersect(const BoundingBox& a, const BoundingBox& b) {
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.right(), b.right());
  const double y1 = std::min(a.bottom(), b.bottom());
  return {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  return intersect(a, b).area();
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double visibility(const BoundingBox& candidate, const BoundingBox& gt) {
  if (gt.area() <= 0.0) return 0.0;
  return std::clamp(intersection_area(candidate, gt) / gt.area(), 0.0, 1.0);
}

double triangular_membership(double x, double lo, double peak, double hi) {
  if (!(lo < peak) || !(peak < hi)) {
    std::ostringstream msg;
    msg << "triangular window requires lo < peak < hi, got (" << lo << ", " << peak << ", " << hi
        << ")";
    throw Error(ErrorKind::kDomainError, msg.str());
  }
  if (x <= lo || x >= hi) return 0.0;
  if (x == peak) return 1.0;
  if (x < peak) return (x - lo) / (peak - lo);
  return (hi - x) / (hi - peak);
}

BoundingBox clip_box(const BoundingBox& box, const ImageBounds& bounds) {
  const double x0 = std::clamp(box.x, 0.0, bounds.width);
  const double y0 = std::clamp(box.y, 0.0, bounds.height);
  const double x1 = std::clamp(box.right(), 0.0, bounds.width);
  const double y1 = std::clamp(box.bottom(), 0.0, bounds.height);
  return {x0, y0, x1 - x0, y1 - y0};
}

CandidatePool generate_candidate_pool(const BoundingBox& gt, std::span<const double> shift_fracs,
                                      std::span<const double> scale_facs,
                                      const ImageBounds& bounds) {
  CandidatePool pool{gt, {}};
  for (double sx : shift_fracs) {
    for (double sy : shift_fracs) {
      for (double sw : scale_facs) {
        for (double sh : scale_facs) {
          const double w = gt.w * sw;
          const double h = gt.h * sh;
          const BoundingBox raw{gt.x + sx * gt.w + 0.5 * (gt.w - w),
                                gt.y + sy * gt.h + 0.5 * (gt.h - h), w, h};
          const BoundingBox clipped = clip_box(raw, bounds);
          if (clipped.w < 1.0 || clipped.h < 1.0) continue;
          if (std::find(pool.candidates.begin(), pool.candidates.end(), clipped) !=
              pool.candidates.end()) {
            continue;
          }
          pool.candidates.push_back(clipped);
        }
      }
    }
  }
  if (pool.candidates.empty()) {
    throw Error(ErrorKind::kEmptyPool, "every shifted/scaled candidate is degenerate");
  }
  return pool;
}

}  // namespace icon
