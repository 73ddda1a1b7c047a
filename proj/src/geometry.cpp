#include "aetransfer/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "aetransfer/error.hpp"

namespace aetransfer {

bool Box::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max;
}

double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) throw DataError("iou: degenerate box");
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::array<double, 4> geometry_descriptor(const Box& window, double image_width,
                                          double image_height) {
  if (!(image_width > 0.0) || !(image_height > 0.0))
    throw DataError("geometry_descriptor: image dimensions must be positive");
  if (!window.valid()) throw DataError("geometry_descriptor: degenerate box");
  const double cx = 0.5 * (window.x_min + window.x_max) / image_width;
  const double cy = 0.5 * (window.y_min + window.y_max) / image_height;
  const double w = window.width() / image_width;
  const double h = window.height() / image_height;
  return {cx, cy, std::log(w * h), std::log(w / h)};
}

}  // namespace aetransfer
