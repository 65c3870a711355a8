#pragma once

#include <cmath>
#include <numbers>
#include <utility>

#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"

namespace cinegroup::anatomy {

/// Pixel-count area of one structure in mm^2.
inline double chamber_area(const LabelImage& mask, int label, vec2 spacing = {1.0, 1.0}) {
    std::size_t count = 0;
    for (auto v : mask)
        if (v == label) ++count;
    if (count == 0) throw validation_error("chamber_area: structure absent");
    return static_cast<double>(count) * spacing.x * spacing.y;
}

/// Single-plane area-length volume V = (8 / 3 pi) A^2 / L, converted to mL.
/// A surrogate for chamber volume when only one long-axis view exists; it
/// recovers the sphere volume exactly from a great disk with L = 2r.
inline double volume_area_length(double area_mm2, double long_axis_mm) {
    if (!(long_axis_mm > 0.0)) throw validation_error("volume_area_length: length must be > 0");
    double v_mm3 = (8.0 / (3.0 * std::numbers::pi)) * area_mm2 * area_mm2 / long_axis_mm;
    return v_mm3 / 1000.0;
}

/// Ejection fraction in percent. A negative result (ESV > EDV) is returned
/// as-is; callers decide how to warn.
inline double lvef(double edv_ml, double esv_ml) {
    if (!(edv_ml > 0.0)) throw validation_error("lvef: EDV must be > 0");
    return 100.0 * (edv_ml - esv_ml) / edv_ml;
}

/// ED = frame of maximum LV area, ES = minimum; ties take the earliest frame.
inline std::pair<int, int> find_ed_es(const LabelMaskSet& masks) {
    int ed = 0, es = 0;
    std::size_t max_area = 0, min_area = 0;
    for (int n = 0; n < masks.frame_count(); ++n) {
        std::size_t area = 0;
        for (auto v : masks.labels[n])
            if (v == kLV) ++area;
        if (area == 0) throw validation_error("find_ed_es: LV absent in a frame");
        if (n == 0) {
            max_area = min_area = area;
            continue;
        }
        if (area > max_area) {
            max_area = area;
            ed = n;
        }
        if (area < min_area) {
            min_area = area;
            es = n;
        }
    }
    return {ed, es};
}

}  // namespace cinegroup::anatomy
