#pragma once

#include <algorithm>
#include <string>

#include "cg/tensor.hpp"

namespace cg {

// Axis-aligned box, pixel units, top-left origin. Stored as x/y/w/h;
// geometry runs on the corner form.
struct BoundingBox {
  double x = 0, y = 0, w = 0, h = 0;

  BoundingBox() = default;
  BoundingBox(double x_, double y_, double w_, double h_) : x(x_), y(y_), w(w_), h(h_) {}

  static BoundingBox from_corners(double x1, double y1, double x2, double y2) {
    return {x1, y1, x2 - x1, y2 - y1};
  }

  double x1() const { return x; }
  double y1() const { return y; }
  double x2() const { return x + w; }
  double y2() const { return y + h; }
  double area() const { return w * h; }
  double cx() const { return x + w / 2; }
  double cy() const { return y + h / 2; }

  bool valid() const { return w > 0 && h > 0; }

  BoundingBox clipped(double img_w, double img_h) const {
    const double nx1 = std::clamp(x1(), 0.0, img_w);
    const double ny1 = std::clamp(y1(), 0.0, img_h);
    const double nx2 = std::clamp(x2(), 0.0, img_w);
    const double ny2 = std::clamp(y2(), 0.0, img_h);
    return from_corners(nx1, ny1, nx2, ny2);
  }

  bool inside(double img_w, double img_h) const {
    return x1() >= 0 && y1() >= 0 && x2() <= img_w && y2() <= img_h;
  }
};

void validate_box(const BoundingBox& b, const std::string& context);

// |A∩B| / |A∪B|, in [0,1]. Throws on zero-area boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

// IoU minus the empty fraction of the smallest enclosing box, in (-1, 1].
double giou(const BoundingBox& a, const BoundingBox& b);

}  // namespace cg
