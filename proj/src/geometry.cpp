#include "cg/geometry.hpp"

namespace cg {

void validate_box(const BoundingBox& b, const std::string& context) {
  if (!(b.w > 0) || !(b.h > 0))
    throw Error("invalid box (w=" + std::to_string(b.w) + ", h=" + std::to_string(b.h) +
                ") in " + context);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  validate_box(a, "iou");
  validate_box(b, "iou");
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double giou(const BoundingBox& a, const BoundingBox& b) {
  validate_box(a, "giou");
  validate_box(b, "giou");
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  const double ew = std::max(a.x2(), b.x2()) - std::min(a.x1(), b.x1());
  const double eh = std::max(a.y2(), b.y2()) - std::min(a.y1(), b.y1());
  const double enc = ew * eh;
  return inter / uni - (enc - uni) / enc;
}

}  // namespace cg
