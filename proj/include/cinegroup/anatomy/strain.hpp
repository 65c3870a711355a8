#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "cinegroup/anatomy/contour.hpp"
#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"
#include "cinegroup/warp/warp.hpp"

namespace cinegroup::anatomy {

inline constexpr double kHingeProximityLimit = 5.0;  // px

/// Per-frame longitudinal strain of one chamber wall; zero at the ED frame by
/// construction. With more than one segment the per-segment curves plus their
/// sum (the literal per-segment aggregate) and mean are reported.
struct StrainCurve {
    int chamber = 0;
    int ed_frame = 0;
    std::vector<double> epsilon;                    // whole wall, per frame
    std::vector<std::vector<double>> per_segment;   // [segment][frame], empty when n_segments == 1
    std::vector<double> segment_sum;                // sum_i eps_i per frame
    std::vector<double> segment_mean;               // mean_i eps_i per frame
};

/// Wall path: the longer of the two arcs of a closed polyline between the
/// projections of the two hinge points (the shorter arc is the valve plane).
/// The returned path starts and ends at the projection points.
inline std::vector<vec2> wall_path(const std::vector<vec2>& poly, const vec2& hinge_a,
                                   const vec2& hinge_b) {
    if (poly.size() < 3) throw validation_error("wall_path: degenerate contour");
    PolylineProjection pa = project_on_contour(hinge_a, poly);
    PolylineProjection pb = project_on_contour(hinge_b, poly);
    if (pa.distance > kHingeProximityLimit || pb.distance > kHingeProximityLimit)
        throw validation_error("wall_path: hinge point too far from contour");

    if (norm(pa.point - pb.point) < 1e-9) {
        // coincident projections: the wall degenerates to the full perimeter
        std::vector<vec2> path;
        path.push_back(pa.point);
        for (std::size_t i = 1; i <= poly.size(); ++i)
            path.push_back(poly[(pa.segment + i) % poly.size()]);
        path.push_back(pa.point);
        return path;
    }

    auto arc = [&](const PolylineProjection& from, const PolylineProjection& to) {
        std::vector<vec2> path;
        path.push_back(from.point);
        std::size_t n = poly.size();
        std::size_t seg = from.segment;
        double t = from.t;
        while (!(seg == to.segment && t <= to.t)) {
            seg = (seg + 1) % n;
            t = 0.0;
            path.push_back(poly[seg]);
            if (path.size() > 2 * n + 4) break;  // both on one segment, wrapped past
        }
        path.push_back(to.point);
        return path;
    };

    // the two complementary arcs, a->b forward along the polyline and b->a
    std::vector<vec2> arc_ab = arc(pa, pb);
    std::vector<vec2> arc_ba = arc(pb, pa);
    auto length = [](const std::vector<vec2>& p) {
        double s = 0.0;
        for (std::size_t i = 1; i < p.size(); ++i) s += norm(p[i] - p[i - 1]);
        return s;
    };
    return length(arc_ab) >= length(arc_ba) ? arc_ab : arc_ba;
}

inline double path_length(const std::vector<vec2>& path, vec2 spacing = {1.0, 1.0}) {
    double s = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        vec2 d = path[i] - path[i - 1];
        s += std::sqrt(d.x * spacing.x * d.x * spacing.x + d.y * spacing.y * d.y * spacing.y);
    }
    return s;
}

namespace detail {

/// Arc-length positions of points projected onto an open path, clamped to be
/// non-decreasing so mildly distorted segment endpoints keep their order.
inline std::vector<double> arc_positions(const std::vector<vec2>& path,
                                         const std::vector<vec2>& points, vec2 spacing) {
    std::vector<double> cumulative(path.size(), 0.0);
    for (std::size_t i = 1; i < path.size(); ++i) {
        vec2 d = path[i] - path[i - 1];
        cumulative[i] = cumulative[i - 1] +
                        std::sqrt(d.x * spacing.x * d.x * spacing.x + d.y * spacing.y * d.y * spacing.y);
    }
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        double best_d = std::numeric_limits<double>::infinity();
        double best_s = 0.0;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            double t = project_on_segment(p, path[i], path[i + 1]);
            vec2 q = path[i] + t * (path[i + 1] - path[i]);
            double d = norm(p - q);
            if (d < best_d) {
                best_d = d;
                best_s = cumulative[i] + t * (cumulative[i + 1] - cumulative[i]);
            }
        }
        out.push_back(best_s);
    }
    for (std::size_t i = 1; i < out.size(); ++i) out[i] = std::max(out[i], out[i - 1]);
    return out;
}

}  // namespace detail

/// Arc length (mm) of the wall: the longer contour arc between the
/// projections of the two hinge points. Coincident hinges degenerate to the
/// full perimeter.
inline double wall_length(const Contour& contour, const vec2& hinge_a, const vec2& hinge_b,
                          vec2 spacing = {1.0, 1.0}) {
    auto path = wall_path(contour.points, hinge_a, hinge_b);
    return path_length(path, spacing);
}

/// Landmark pair whose hinges frame a chamber's wall: the mitral pair for the
/// left heart, the tricuspid pair for the right heart.
inline std::pair<int, int> hinge_indices_for_chamber(int chamber) {
    switch (chamber) {
        case kLV:
        case kLVM:
        case kLA:
            return {0, 1};
        case kRV:
        case kRA:
            return {2, 3};
        default:
            throw validation_error("hinge_indices_for_chamber: not a chamber label");
    }
}

/// Strain curve from per-frame contours and hinge pairs; the reference length
/// is taken at `ed_frame`.
inline StrainCurve gls_from_contours(const std::vector<Contour>& contours,
                                     const std::vector<std::array<vec2, 2>>& hinges, int ed_frame,
                                     vec2 spacing = {1.0, 1.0}) {
    if (contours.size() != hinges.size() || contours.empty())
        throw validation_error("gls_from_contours: contour/hinge count mismatch");
    if (ed_frame < 0 || ed_frame >= static_cast<int>(contours.size()))
        throw validation_error("gls_from_contours: ED frame out of range");
    StrainCurve curve;
    curve.chamber = contours.front().label;
    curve.ed_frame = ed_frame;
    std::vector<double> lengths(contours.size());
    for (std::size_t n = 0; n < contours.size(); ++n)
        lengths[n] = wall_length(contours[n], hinges[n][0], hinges[n][1], spacing);
    double l0 = lengths[ed_frame];
    if (!(l0 > 0.0)) throw validation_error("gls_from_contours: degenerate wall at ED");
    curve.epsilon.resize(contours.size());
    for (std::size_t n = 0; n < contours.size(); ++n)
        curve.epsilon[n] = (lengths[n] - l0) / l0;
    curve.epsilon[ed_frame] = 0.0;
    return curve;
}

/// Full strain pipeline: extracts the chamber contour per frame, measures the
/// wall between the chamber's hinge pair, and reports (L - L0)/L0 against the
/// ED frame. For n_segments > 1 the ED wall is cut into equal-arc segments
/// whose endpoints ride to each frame through the relative transforms;
/// per-segment strains, their sum and their mean are reported alongside the
/// whole-wall curve.
inline StrainCurve gls_curve(const LabelMaskSet& masks, const LandmarkSet& landmarks, int chamber,
                             const DisplacementFieldSet& fields, int ed_frame, int n_segments = 1,
                             vec2 spacing = {1.0, 1.0}, double inversion_tol = 0.01,
                             int inversion_max_iters = 100) {
    int t_count = masks.frame_count();
    if (landmarks.frame_count() != t_count)
        throw validation_error("gls_curve: landmark/mask frame count mismatch");
    if (fields.frame_count() != t_count)
        throw validation_error("gls_curve: field/mask frame count mismatch");
    if (n_segments < 1) throw validation_error("gls_curve: n_segments must be >= 1");
    auto [ha, hb] = hinge_indices_for_chamber(chamber);

    std::vector<Contour> contours;
    std::vector<std::array<vec2, 2>> hinges;
    contours.reserve(t_count);
    for (int n = 0; n < t_count; ++n) {
        contours.push_back(extract_contour(masks.labels[n], chamber, n));
        hinges.push_back({landmarks.points[n][ha], landmarks.points[n][hb]});
    }
    StrainCurve curve = gls_from_contours(contours, hinges, ed_frame, spacing);

    if (n_segments > 1) {
        auto ed_path = wall_path(contours[ed_frame].points, hinges[ed_frame][0],
                                         hinges[ed_frame][1]);
        std::vector<double> cumulative(ed_path.size(), 0.0);
        for (std::size_t i = 1; i < ed_path.size(); ++i)
            cumulative[i] = cumulative[i - 1] + path_length({ed_path[i - 1], ed_path[i]}, spacing);
        double total = cumulative.back();
        // equal-arc segment endpoints on the ED wall
        std::vector<vec2> ed_knots;
        for (int s = 0; s <= n_segments; ++s) {
            double target = total * s / n_segments;
            auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
            std::size_t i = std::min<std::size_t>(ed_path.size() - 1,
                                                  static_cast<std::size_t>(it - cumulative.begin()));
            if (i == 0) {
                ed_knots.push_back(ed_path[0]);
                continue;
            }
            double seg_len = cumulative[i] - cumulative[i - 1];
            double t = seg_len > 0.0 ? (target - cumulative[i - 1]) / seg_len : 0.0;
            ed_knots.push_back(ed_path[i - 1] + t * (ed_path[i] - ed_path[i - 1]));
        }

        warp::InversionResult inv_ed =
            warp::invert_field(fields.fields[ed_frame], inversion_tol, inversion_max_iters);
        std::vector<std::vector<double>> seg_lengths(t_count, std::vector<double>(n_segments, 0.0));
        for (int n = 0; n < t_count; ++n) {
            auto path_n = wall_path(contours[n].points, hinges[n][0], hinges[n][1]);
            std::vector<vec2> knots_n = ed_knots;
            if (n != ed_frame) {
                // carry ED knots to frame n through T_n o T_ed^{-1}
                Field rel = warp::compose(fields.fields[n], inv_ed.field);
                for (auto& p : knots_n) p += warp::sample(rel, p.x, p.y);
            }
            auto positions = detail::arc_positions(path_n, knots_n, spacing);
            for (int s = 0; s < n_segments; ++s)
                seg_lengths[n][s] = positions[s + 1] - positions[s];
        }
        curve.per_segment.assign(n_segments, std::vector<double>(t_count, 0.0));
        curve.segment_sum.assign(t_count, 0.0);
        curve.segment_mean.assign(t_count, 0.0);
        for (int s = 0; s < n_segments; ++s) {
            double l0 = seg_lengths[ed_frame][s];
            for (int n = 0; n < t_count; ++n) {
                double eps = l0 > 0.0 ? (seg_lengths[n][s] - l0) / l0 : 0.0;
                if (n == ed_frame) eps = 0.0;
                curve.per_segment[s][n] = eps;
                curve.segment_sum[n] += eps;
            }
        }
        for (int n = 0; n < t_count; ++n) curve.segment_mean[n] = curve.segment_sum[n] / n_segments;
    }
    return curve;
}

}  // namespace cinegroup::anatomy
