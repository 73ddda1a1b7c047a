#pragma once

#include <array>

namespace aetransfer {

/// Axis-aligned box in continuous pixel coordinates, corners inclusive of area.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  /// Finite corners with strictly positive extent.
  bool valid() const;

  bool operator==(const Box&) const = default;
};

/// Intersection-over-union on areas. Throws DataError on a degenerate box.
double iou(const Box& a, const Box& b);

/// Position/scale cue of a window: [cx, cy, log(W*H), log(W/H)] with the
/// center and extent normalized by the image size.
std::array<double, 4> geometry_descriptor(const Box& window, double image_width,
                                          double image_height);

}  // namespace aetransfer
