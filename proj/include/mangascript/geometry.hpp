#pragma once

#include <algorithm>
#include <cmath>

namespace mangascript {

struct BoundingBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x1 + x2); }
    double center_y() const { return 0.5 * (y1 + y2); }

    bool valid() const {
        return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
               x1 >= 0.0 && y1 >= 0.0 && x1 < x2 && y1 < y2;
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    return inter / (a.area() + b.area() - inter);
}

inline double center_distance(const BoundingBox& a, const BoundingBox& b) {
    return std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y());
}

}  // namespace mangascript
