#include "relocc/geometry.hpp"

namespace relocc {

double intersection_area(const Box& a, const Box& b) {
  double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double union_area(const Box& a, const Box& b) {
  return a.area() + b.area() - intersection_area(a, b);
}

Box enclosing_hull(const Box& a, const Box& b) {
  return Box(std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min),
             std::max(a.x_max, b.x_max), std::max(a.y_max, b.y_max));
}

bool intersects(const Box& a, const Box& b) {
  return intersection_area(a, b) > 0.0;
}

double iou(const Box& a, const Box& b) {
  double u = union_area(a, b);
  if (u <= 0.0) return 0.0;
  return intersection_area(a, b) / u;
}

double giou(const Box& a, const Box& b) {
  double u = union_area(a, b);
  if (u <= 0.0) return 0.0;
  double hull = enclosing_hull(a, b).area();
  if (hull <= 0.0) return 0.0;
  return intersection_area(a, b) / u - (hull - u) / hull;
}

Box generalized_intersection_box(const Box& a, const Box& b) {
  // Middle two of the sorted coordinates per axis: the second smallest
  // is min(max of lowers, min of uppers), the third smallest the max.
  double x_lo = std::min(std::max(a.x_min, b.x_min), std::min(a.x_max, b.x_max));
  double x_hi = std::max(std::max(a.x_min, b.x_min), std::min(a.x_max, b.x_max));
  double y_lo = std::min(std::max(a.y_min, b.y_min), std::min(a.y_max, b.y_max));
  double y_hi = std::max(std::max(a.y_min, b.y_min), std::min(a.y_max, b.y_max));
  return Box(x_lo, y_lo, x_hi, y_hi);
}

}  // namespace relocc
