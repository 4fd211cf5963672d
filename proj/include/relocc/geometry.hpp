#pragma once

#include <algorithm>
#include <array>

namespace relocc {

// Axis-aligned box in normalized image coordinates, corner form.
// Construction normalizes corner ordering so x_min <= x_max and
// y_min <= y_max always hold.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  Box() = default;
  Box(double x0, double y0, double x1, double y1)
      : x_min(std::min(x0, x1)),
        y_min(std::min(y0, y1)),
        x_max(std::max(x0, x1)),
        y_max(std::max(y0, y1)) {}

  // (c_x, c_y, w, h) with w, h >= 0.
  static Box from_center(double cx, double cy, double w, double h) {
    w = std::max(w, 0.0);
    h = std::max(h, 0.0);
    return Box(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2);
  }

  std::array<double, 4> to_center() const {
    return {(x_min + x_max) / 2, (y_min + y_max) / 2, x_max - x_min,
            y_max - y_min};
  }

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool degenerate() const { return area() <= 0.0; }

  // Clamp to the unit square. Applied when boxes cross a file boundary;
  // interior math stays unclamped.
  Box clamped() const {
    auto c = [](double v) { return std::clamp(v, 0.0, 1.0); };
    return Box(c(x_min), c(y_min), c(x_max), c(y_max));
  }

  bool operator==(const Box& o) const = default;
};

double intersection_area(const Box& a, const Box& b);
double union_area(const Box& a, const Box& b);
Box enclosing_hull(const Box& a, const Box& b);

// True when the literal intersection has positive area.
bool intersects(const Box& a, const Box& b);

// Intersection over union in [0,1]. Zero-area inputs give 0, identical
// or not.
double iou(const Box& a, const Box& b);

// Generalized IoU in (-1,1]: iou minus the enclosing-hull penalty.
// Both boxes zero-area gives 0.
double giou(const Box& a, const Box& b);

// Box spanned per axis by the middle two of the four sorted box
// coordinates. Equals the literal intersection when the boxes overlap,
// the inner box under containment, and the gap-spanning box when
// disjoint.
Box generalized_intersection_box(const Box& a, const Box& b);

}  // namespace relocc
