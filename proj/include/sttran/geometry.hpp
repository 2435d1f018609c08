// Boxes, IoU, and binary spatial-mask rasterization.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sttran/common.hpp"

namespace sttran {

struct BoundingBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
    double short_edge() const { return std::min(width(), height()); }
    bool valid() const { return x1 < x2 && y1 < y2; }

    BoundingBox clamped(double w, double h) const {
        return {std::clamp(x1, 0.0, w), std::clamp(y1, 0.0, h), std::clamp(x2, 0.0, w), std::clamp(y2, 0.0, h)};
    }

    // smallest box covering both
    static BoundingBox span(const BoundingBox& a, const BoundingBox& b) {
        return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
    }
};

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
}

// Rasterizes a box onto a grid x grid binary mask: a cell is set when the box
// overlaps it with positive area. A box that rasterizes to nothing gets its
// single nearest cell set (with a warning at the call site).
inline std::vector<float> rasterize_box_mask(const BoundingBox& box, double frame_w, double frame_h,
                                             std::size_t grid, bool* degenerate = nullptr) {
    std::vector<float> mask(grid * grid, 0.0f);
    const BoundingBox b = box.clamped(frame_w, frame_h);
    const double cw = frame_w / static_cast<double>(grid);
    const double ch = frame_h / static_cast<double>(grid);
    auto cell_lo = [](double v, double cell, std::size_t grid_n) {
        return std::clamp(static_cast<long>(std::floor(v / cell)), 0L, static_cast<long>(grid_n) - 1);
    };
    auto cell_hi = [](double v, double cell, std::size_t grid_n) {
        return std::clamp(static_cast<long>(std::ceil(v / cell)) - 1, 0L, static_cast<long>(grid_n) - 1);
    };
    if (b.width() > 0.0 && b.height() > 0.0) {
        const long c0 = cell_lo(b.x1, cw, grid), c1 = cell_hi(b.x2, cw, grid);
        const long r0 = cell_lo(b.y1, ch, grid), r1 = cell_hi(b.y2, ch, grid);
        if (c0 <= c1 && r0 <= r1) {
            for (long r = r0; r <= r1; ++r)
                for (long c = c0; c <= c1; ++c) mask[static_cast<std::size_t>(r) * grid + c] = 1.0f;
            if (degenerate) *degenerate = false;
            return mask;
        }
    }
    // degenerate after rasterization: nearest cell to the box center
    const double cx = 0.5 * (b.x1 + b.x2), cy = 0.5 * (b.y1 + b.y2);
    const long c = std::clamp(static_cast<long>(cx / cw), 0L, static_cast<long>(grid) - 1);
    const long r = std::clamp(static_cast<long>(cy / ch), 0L, static_cast<long>(grid) - 1);
    mask[static_cast<std::size_t>(r) * grid + c] = 1.0f;
    if (degenerate) *degenerate = true;
    return mask;
}

}  // namespace sttran
