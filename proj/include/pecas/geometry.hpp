#pragma once

namespace pecas {

/// Axis-aligned box in pixel units: top-left corner plus extent.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const noexcept { return w * h; }
  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

}  // namespace pecas
