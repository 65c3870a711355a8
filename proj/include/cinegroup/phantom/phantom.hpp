#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "cinegroup/anatomy/strain.hpp"
#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"

namespace cinegroup::phantom {

// Synthetic 4-chamber cine with closed-form ground truth. The deformation is
// a radial map about the heart center,
//   T_n(x) = c + (x - c) (1 + alpha_n g(|x - c|)),
// with the raised-cosine envelope g(r) = (1 + cos(pi r / R)) / 2 for r <= R
// and 0 beyond, so the borders stay static. alpha_n = A sin(2 pi n / T) / m,
// where m = max_r r g(r), makes the peak displacement exactly A pixels and
// the per-pixel displacement sum across the cycle exactly zero. Frames, masks
// and landmarks are the rest geometry carried by that map.
//
// The layout mimics a 4-chamber view: ventricles below a flat valve plane,
// atria above it, the myocardial ring wrapping the LV pool. The valve gap is
// held at a few pixels across grid sizes so the hinge landmarks stay within
// projection range of both chambers they separate.

struct EllipseSpec {
    double cx, cy;  // center, normalized to the layout square
    double ax, ay;  // semi-axes
};

struct ChamberGeometry {
    EllipseSpec lv_pool{0.36, 0.62, 0.115, 0.175};
    EllipseSpec lvm_outer{0.36, 0.62, 0.16, 0.235};
    EllipseSpec rv{0.67, 0.60, 0.10, 0.155};
    EllipseSpec la{0.36, 0.0, 0.095, 0.105};  // centers derived from the valve gap
    EllipseSpec ra{0.67, 0.0, 0.09, 0.095};
    double valve_plane = 0.47;  // flat atrioventricular interface
    double la_rise = 0.065;     // LA center above its cut plane
    double ra_rise = 0.06;
    vec2 envelope_center{0.50, 0.47};
    double envelope_radius = 0.44;
    double mitral_halfspan = 0.045;
    double tricuspid_halfspan = 0.04;
    double lateral_clearance = 0.05;  // LVM-to-RV gap, proportional to the grid
};

/// Valve gap in pixels: proportional at small grids, capped so the hinge
/// points stay within 5 px of both facing contours at large ones.
inline double valve_gap_px(int width, int height) {
    double s = std::min(width, height);
    return std::clamp(0.05 * s, 3.15, 7.0);
}

struct PhantomSpec {
    int width = 256;
    int height = 256;
    int frames = 25;
    double amplitude = 3.0;  // peak displacement, px
    double noise_sigma = 0.0;
    double contrast_gain = 1.0;
    double contrast_offset = 0.0;
    std::uint64_t seed = 7;
    ChamberGeometry geometry;

    double min_clearance_px() const {
        double s = std::min(width, height);
        return std::min(valve_gap_px(width, height), geometry.lateral_clearance * s);
    }

    void validate() const {
        if (width < 32 || height < 32)
            throw validation_error("PhantomSpec: grid must be at least 32x32");
        if (frames < 4) throw validation_error("PhantomSpec: needs at least 4 frames");
        if (amplitude < 0.0) throw validation_error("PhantomSpec: amplitude must be >= 0");
        if (amplitude >= min_clearance_px())
            throw validation_error("PhantomSpec: amplitude must stay below the chamber clearance");
        if (noise_sigma < 0.0) throw validation_error("PhantomSpec: noise sigma must be >= 0");
        if (!(contrast_gain > 0.0)) throw validation_error("PhantomSpec: gain must be > 0");
    }
};

struct PhantomData {
    CineSequence sequence;
    LabelMaskSet masks;
    DisplacementFieldSet gt_fields;
    LandmarkSet landmarks;
    int ed_frame = 0;
    int es_frame = 0;
    // analytic wall-length ratio L_n / L_ED per frame for LV, RV, LA, RA
    std::vector<std::array<double, 4>> wall_ratio;
};

namespace detail {

struct Layout {
    double scale;  // layout square side in px
    vec2 origin;   // top-left of the layout square
    ChamberGeometry g;
    double gap;    // valve gap in normalized units
    double la_cy, ra_cy;

    Layout(int width, int height, const ChamberGeometry& geometry) : g(geometry) {
        scale = std::min(width, height);
        origin = {(width - scale) / 2.0, (height - scale) / 2.0};
        gap = valve_gap_px(width, height) / scale;
        la_cy = g.valve_plane - gap - g.la_rise;
        ra_cy = g.valve_plane - gap - g.ra_rise;
    }

    vec2 to_px(vec2 p) const { return {origin.x + p.x * scale, origin.y + p.y * scale}; }
    vec2 to_norm(vec2 px) const { return {(px.x - origin.x) / scale, (px.y - origin.y) / scale}; }

    static bool in_ellipse(vec2 p, const EllipseSpec& e, double cy) {
        double dx = (p.x - e.cx) / e.ax, dy = (p.y - cy) / e.ay;
        return dx * dx + dy * dy <= 1.0;
    }
    static bool in_ellipse(vec2 p, const EllipseSpec& e) { return in_ellipse(p, e, e.cy); }

    /// Label at a point in normalized layout coordinates. Ventricles live
    /// below the flat valve plane, atria above the valve gap.
    int label_at(vec2 p) const {
        bool below_valve = p.y >= g.valve_plane;
        bool above_gap = p.y <= g.valve_plane - gap;
        if (below_valve && in_ellipse(p, g.lv_pool)) return kLV;
        if (below_valve && in_ellipse(p, g.lvm_outer) && !in_ellipse(p, g.lv_pool)) return kLVM;
        if (below_valve && in_ellipse(p, g.rv)) return kRV;
        if (above_gap && in_ellipse(p, g.la, la_cy)) return kLA;
        if (above_gap && in_ellipse(p, g.ra, ra_cy)) return kRA;
        return kBackground;
    }

    /// Rest-image intensity: structure plateaus with sinusoidal texture whose
    /// wavelength is a few pixels at any grid size. Locally-linear shading is
    /// invisible to windowed NCC, so the texture must carry curvature inside
    /// one correlation window for the similarity to constrain displacements.
    double intensity_at(vec2 p) const {
        double u = p.x * scale, v = p.y * scale;  // pixel coordinates
        constexpr double tau = 2.0 * std::numbers::pi;
        double base;
        switch (label_at(p)) {
            case kLV:
                base = 0.82 + 0.08 * std::sin(tau * u / 7.3 + 1.0) * std::cos(tau * v / 8.1);
                break;
            case kLVM:
                base = 0.34 + 0.06 * std::cos(tau * u / 6.7) * std::sin(tau * v / 7.9 + 0.5);
                break;
            case kRV:
                base = 0.75 + 0.08 * std::cos(tau * u / 7.7 + 2.0) * std::sin(tau * v / 6.9);
                break;
            case kLA:
                base = 0.68 + 0.07 * std::sin(tau * u / 7.1) * std::sin(tau * v / 8.7 + 1.0);
                break;
            case kRA:
                base = 0.62 + 0.07 * std::cos(tau * u / 8.3) * std::cos(tau * v / 7.3 + 2.0);
                break;
            default:
                base = 0.14 + 0.06 * std::sin(tau * u / 9.1 + 0.3) * std::sin(tau * v / 8.3 + 0.8) +
                       0.04 * (p.x + p.y);
        }
        return base;
    }

    std::array<vec2, 4> rest_hinges() const {
        double y = g.valve_plane - 0.5 * gap;
        return {vec2{g.lv_pool.cx - g.mitral_halfspan, y}, vec2{g.lv_pool.cx + g.mitral_halfspan, y},
                vec2{g.rv.cx - g.tricuspid_halfspan, y}, vec2{g.rv.cx + g.tricuspid_halfspan, y}};
    }

    /// Dense analytic boundary polyline of one chamber (cut ellipse); the
    /// implicit closing segment of the polyline is the flat valve chord.
    std::vector<vec2> chamber_contour(int label, int samples) const {
        EllipseSpec e;
        double cy;
        bool keep_below;  // keep the part below the cut plane (ventricles)
        double plane;
        switch (label) {
            case kLV: e = g.lv_pool; cy = e.cy; keep_below = true; plane = g.valve_plane; break;
            case kRV: e = g.rv; cy = e.cy; keep_below = true; plane = g.valve_plane; break;
            case kLA: e = g.la; cy = la_cy; keep_below = false; plane = g.valve_plane - gap; break;
            case kRA: e = g.ra; cy = ra_cy; keep_below = false; plane = g.valve_plane - gap; break;
            default: throw validation_error("chamber_contour: not a pool chamber");
        }
        std::vector<vec2> kept;
        kept.reserve(samples);
        for (int i = 0; i < samples; ++i) {
            double t = 2.0 * std::numbers::pi * i / samples;
            vec2 p{e.cx + e.ax * std::cos(t), cy + e.ay * std::sin(t)};
            if ((keep_below && p.y >= plane) || (!keep_below && p.y <= plane)) kept.push_back(p);
        }
        // rotate so the polyline starts right after the cut; the dropped cap
        // leaves exactly one index gap in the sampled parameter sequence
        std::vector<vec2> ordered = kept;
        for (std::size_t i = 1; i < kept.size(); ++i) {
            double jump = norm(kept[i] - kept[i - 1]);
            if (jump > 4.0 * (2.0 * std::numbers::pi / samples) * std::max(e.ax, e.ay)) {
                ordered.assign(kept.begin() + i, kept.end());
                ordered.insert(ordered.end(), kept.begin(), kept.begin() + i);
                break;
            }
        }
        return ordered;
    }
};

/// Deterministic Gaussian sampler (Box-Muller on the raw engine output), so
/// phantom noise is identical across standard-library implementations.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : eng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = canonical(), u2 = canonical();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    double canonical() {
        // (0, 1]: guards the log
        return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    }

    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace detail

inline PhantomData generate(const PhantomSpec& spec) {
    spec.validate();
    int w = spec.width, h = spec.height, t_count = spec.frames;
    detail::Layout layout(w, h, spec.geometry);
    double s = layout.scale;
    vec2 c = layout.to_px(spec.geometry.envelope_center);
    double r_cut = spec.geometry.envelope_radius * s;

    auto envelope = [&](double r) {
        return r < r_cut ? 0.5 * (1.0 + std::cos(std::numbers::pi * r / r_cut)) : 0.0;
    };
    // peak of r g(r), locating the displacement maximum
    double m_peak = 0.0;
    for (int i = 0; i <= 4096; ++i) {
        double r = r_cut * i / 4096.0;
        m_peak = std::max(m_peak, r * envelope(r));
    }

    std::vector<double> alpha(t_count);
    int ed = 0, es = 0;
    for (int n = 0; n < t_count; ++n) {
        alpha[n] = spec.amplitude / m_peak * std::sin(2.0 * std::numbers::pi * n / t_count);
        if (alpha[n] > alpha[ed]) ed = n;
        if (alpha[n] < alpha[es]) es = n;
    }

    auto forward = [&](vec2 x, double a) {
        vec2 d = x - c;
        return c + d * (1.0 + a * envelope(norm(d)));
    };
    auto inverse = [&](vec2 y, double a) {
        vec2 d = y - c;
        double target = norm(d);
        if (target == 0.0) return c;
        double lo = 0.0, hi = target + std::abs(a) * m_peak + 1.0;
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            (mid * (1.0 + a * envelope(mid)) < target ? lo : hi) = mid;
        }
        double rho = 0.5 * (lo + hi);
        return c + d * (rho / target);
    };

    detail::GaussianSampler noise(spec.seed);
    ImageStack frames(t_count, Image(w, h));
    LabelStack masks(t_count, LabelImage(w, h));
    FieldStack fields(t_count, Field(w, h));
    std::vector<std::array<vec2, 4>> landmarks(t_count);
    auto rest_hinges = layout.rest_hinges();

    for (int n = 0; n < t_count; ++n) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                vec2 px{static_cast<double>(x), static_cast<double>(y)};
                vec2 rest = inverse(px, alpha[n]);
                vec2 norm_pt = layout.to_norm(rest);
                masks[n](x, y) = static_cast<std::uint8_t>(layout.label_at(norm_pt));
                double v = spec.contrast_offset + spec.contrast_gain * layout.intensity_at(norm_pt);
                if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise();
                frames[n](x, y) = std::clamp(v, 0.0, 1.0);

                vec2 d = px - c;
                fields[n](x, y) = d * (alpha[n] * envelope(norm(d)));
            }
        for (int l = 0; l < 4; ++l)
            landmarks[n][l] = forward(layout.to_px(rest_hinges[l]), alpha[n]);
    }

    // rest-geometry consistency: no point may satisfy two membership tests
    // (guards custom geometry; the default layout is disjoint by design)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            vec2 p = layout.to_norm({static_cast<double>(x), static_cast<double>(y)});
            bool below = p.y >= layout.g.valve_plane;
            bool above = p.y <= layout.g.valve_plane - layout.gap;
            int hits = 0;
            hits += (below && detail::Layout::in_ellipse(p, layout.g.lv_pool)) ? 1 : 0;
            hits += (below && detail::Layout::in_ellipse(p, layout.g.lvm_outer) &&
                     !detail::Layout::in_ellipse(p, layout.g.lv_pool)) ? 1 : 0;
            hits += (below && detail::Layout::in_ellipse(p, layout.g.rv)) ? 1 : 0;
            hits += (above && detail::Layout::in_ellipse(p, layout.g.la, layout.la_cy)) ? 1 : 0;
            hits += (above && detail::Layout::in_ellipse(p, layout.g.ra, layout.ra_cy)) ? 1 : 0;
            if (hits > 1) throw validation_error("PhantomSpec: overlapping structures at rest");
        }

    PhantomData data;
    data.sequence = CineSequence(std::move(frames), {1.0, 1.0});
    data.masks = LabelMaskSet(std::move(masks));
    data.gt_fields = DisplacementFieldSet(std::move(fields));
    data.landmarks = LandmarkSet(std::move(landmarks), w, h);
    data.ed_frame = ed;
    data.es_frame = es;

    // analytic wall-length ratios: dense rest contours carried by the exact
    // map, measured with the same hinge-projection convention as the pipeline
    std::array<int, 4> chambers{kLV, kRV, kLA, kRA};
    std::array<std::pair<int, int>, 4> hinge_pairs{{{0, 1}, {2, 3}, {0, 1}, {2, 3}}};
    constexpr int kSamples = 4096;
    data.wall_ratio.assign(t_count, {1.0, 1.0, 1.0, 1.0});
    for (int ci = 0; ci < 4; ++ci) {
        std::vector<vec2> rest_contour = layout.chamber_contour(chambers[ci], kSamples);
        for (auto& p : rest_contour) p = layout.to_px(p);
        vec2 rest_ha = layout.to_px(rest_hinges[hinge_pairs[ci].first]);
        vec2 rest_hb = layout.to_px(rest_hinges[hinge_pairs[ci].second]);
        std::vector<double> lengths(t_count);
        for (int n = 0; n < t_count; ++n) {
            std::vector<vec2> moved = rest_contour;
            for (auto& p : moved) p = forward(p, alpha[n]);
            auto path = anatomy::wall_path(moved, forward(rest_ha, alpha[n]),
                                           forward(rest_hb, alpha[n]));
            lengths[n] = anatomy::path_length(path);
        }
        for (int n = 0; n < t_count; ++n) data.wall_ratio[n][ci] = lengths[n] / lengths[ed];
    }
    return data;
}

}  // namespace cinegroup::phantom
