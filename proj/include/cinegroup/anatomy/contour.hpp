#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"

namespace cinegroup::anatomy {

/// Closed boundary polyline of one structure in one frame; vertices are
/// boundary pixel centers in pixel coordinates, oriented so the signed area
/// is positive.
struct Contour {
    std::vector<vec2> points;
    int label = 0;
    int frame = 0;
    bool traced_largest_of_multiple = false;  // structure had several components
};

inline double signed_area(const std::vector<vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const vec2& p = poly[i];
        const vec2& q = poly[(i + 1) % poly.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

inline double perimeter(const std::vector<vec2>& poly, vec2 spacing = {1.0, 1.0}) {
    double len = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        vec2 d = poly[(i + 1) % poly.size()] - poly[i];
        len += std::sqrt(d.x * spacing.x * d.x * spacing.x + d.y * spacing.y * d.y * spacing.y);
    }
    return len;
}

namespace detail {

// 8-connected component labeling of the structure's indicator; returns the
// component id per pixel (0 = background) and the id of the largest one.
inline int largest_component(const LabelImage& mask, int label, grid<int>& comp, int& count) {
    int w = mask.width(), h = mask.height();
    comp = grid<int>(w, h, 0);
    count = 0;
    int best = 0, best_size = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (mask(x, y) != label || comp(x, y) != 0) continue;
            int id = ++count;
            int size = 0;
            std::queue<std::pair<int, int>> q;
            q.emplace(x, y);
            comp(x, y) = id;
            while (!q.empty()) {
                auto [cx, cy] = q.front();
                q.pop();
                ++size;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        if (mask(nx, ny) == label && comp(nx, ny) == 0) {
                            comp(nx, ny) = id;
                            q.emplace(nx, ny);
                        }
                    }
            }
            if (size > best_size) {
                best_size = size;
                best = id;
            }
        }
    return best;
}

}  // namespace detail

/// Ordered closed boundary polyline via Moore-neighbor border following on
/// the label's indicator. Structures with several 8-connected components are
/// traced on the largest one (flagged on the result).
inline Contour extract_contour(const LabelImage& mask, int label, int frame = 0) {
    grid<int> comp;
    int n_components = 0;
    int target = detail::largest_component(mask, label, comp, n_components);
    if (target == 0) throw validation_error("extract_contour: structure absent");

    int w = mask.width(), h = mask.height();
    auto inside = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < w && y < h && comp(x, y) == target;
    };

    // start at the first foreground pixel in scan order; its west neighbor is
    // guaranteed outside
    int sx = -1, sy = -1;
    for (int y = 0; y < h && sx < 0; ++y)
        for (int x = 0; x < w; ++x)
            if (comp(x, y) == target) {
                sx = x;
                sy = y;
                break;
            }

    // Moore neighborhood in clockwise order starting from west
    static constexpr int nbr[8][2] = {{-1, 0}, {-1, -1}, {0, -1}, {1, -1},
                                      {1, 0},  {1, 1},   {0, 1},  {-1, 1}};
    std::vector<vec2> points;
    int cx = sx, cy = sy;
    int backtrack = 0;  // index into nbr of the neighbor we entered from
    std::size_t guard = 4 * mask.size() + 8;
    for (std::size_t step = 0; step < guard; ++step) {
        points.emplace_back(static_cast<double>(cx), static_cast<double>(cy));
        int found = -1;
        for (int i = 1; i <= 8; ++i) {
            int dir = (backtrack + i) % 8;
            if (inside(cx + nbr[dir][0], cy + nbr[dir][1])) {
                found = dir;
                break;
            }
        }
        if (found < 0) break;  // isolated pixel
        int px = cx, py = cy;
        cx += nbr[found][0];
        cy += nbr[found][1];
        // new backtrack: the previous pixel as seen from the new one
        for (int i = 0; i < 8; ++i)
            if (cx + nbr[i][0] == px && cy + nbr[i][1] == py) {
                backtrack = i;
                break;
            }
        if (cx == sx && cy == sy) break;
    }

    if (points.size() < 3)
        throw validation_error("extract_contour: fewer than 3 boundary pixels");

    if (signed_area(points) < 0.0) std::reverse(points.begin(), points.end());

    Contour c;
    c.points = std::move(points);
    c.label = label;
    c.frame = frame;
    c.traced_largest_of_multiple = n_components > 1;
    return c;
}

// ---------------------------------------------------------------------------
// Point-to-polyline machinery shared by the strain and evaluation code.

/// Closest point on segment [a, b] to p, returned as the parameter t in [0, 1].
inline double project_on_segment(const vec2& p, const vec2& a, const vec2& b) {
    vec2 ab = b - a;
    double len2 = norm_sq(ab);
    if (len2 == 0.0) return 0.0;
    double t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2;
    return std::clamp(t, 0.0, 1.0);
}

struct PolylineProjection {
    std::size_t segment = 0;
    double t = 0.0;
    double distance = 0.0;
    vec2 point;
};

/// Nearest point on a closed polyline (distance in pixel units).
inline PolylineProjection project_on_contour(const vec2& p, const std::vector<vec2>& poly) {
    PolylineProjection best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const vec2& a = poly[i];
        const vec2& b = poly[(i + 1) % poly.size()];
        double t = project_on_segment(p, a, b);
        vec2 q = a + t * (b - a);
        double d = norm(p - q);
        if (d < best.distance) {
            best.distance = d;
            best.segment = i;
            best.t = t;
            best.point = q;
        }
    }
    return best;
}

}  // namespace cinegroup::anatomy
