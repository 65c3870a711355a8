#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cinegroup/anatomy/contour.hpp"
#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"
#include "cinegroup/warp/warp.hpp"

namespace cinegroup::eval {

using anatomy::Contour;

/// Dice overlap of one label between two masks; both-empty pairs score 1
/// (an absent structure correctly predicted absent).
inline double dsc_metric(const LabelImage& a, const LabelImage& b, int label) {
    if (!a.same_shape(b)) throw validation_error("dsc_metric: shape mismatch");
    std::size_t inter = 0, ca = 0, cb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        bool va = a[i] == label, vb = b[i] == label;
        inter += (va && vb) ? 1 : 0;
        ca += va ? 1 : 0;
        cb += vb ? 1 : 0;
    }
    if (ca + cb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(ca + cb);
}

namespace detail {

inline std::vector<vec2> to_mm(const std::vector<vec2>& pts, vec2 spacing) {
    std::vector<vec2> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.emplace_back(p.x * spacing.x, p.y * spacing.y);
    return out;
}

inline double point_to_polyline(const vec2& p, const std::vector<vec2>& poly) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const vec2& a = poly[i];
        const vec2& b = poly[(i + 1) % poly.size()];
        double t = anatomy::project_on_segment(p, a, b);
        vec2 q = a + t * (b - a);
        best = std::min(best, norm(p - q));
    }
    return best;
}

inline void check_contours(const Contour& a, const Contour& b) {
    if (a.points.size() < 2 || b.points.size() < 2)
        throw validation_error("contour metric: degenerate contour");
}

}  // namespace detail

/// Mean contour distance in mm: symmetric mean of vertex-to-polyline
/// distances, measured against segments rather than vertices.
inline double mcd(const Contour& a, const Contour& b, vec2 spacing = {1.0, 1.0}) {
    detail::check_contours(a, b);
    auto pa = detail::to_mm(a.points, spacing);
    auto pb = detail::to_mm(b.points, spacing);
    double sum_ab = 0.0, sum_ba = 0.0;
    for (const auto& p : pa) sum_ab += detail::point_to_polyline(p, pb);
    for (const auto& q : pb) sum_ba += detail::point_to_polyline(q, pa);
    return 0.5 * (sum_ab / pa.size() + sum_ba / pb.size());
}

/// Hausdorff distance in mm: the larger of the two directed max-min
/// vertex-to-polyline distances.
inline double hd(const Contour& a, const Contour& b, vec2 spacing = {1.0, 1.0}) {
    detail::check_contours(a, b);
    auto pa = detail::to_mm(a.points, spacing);
    auto pb = detail::to_mm(b.points, spacing);
    double max_ab = 0.0, max_ba = 0.0;
    for (const auto& p : pa) max_ab = std::max(max_ab, detail::point_to_polyline(p, pb));
    for (const auto& q : pb) max_ba = std::max(max_ba, detail::point_to_polyline(q, pa));
    return std::max(max_ab, max_ba);
}

/// Transfers reference-frame landmarks to every frame through the relative
/// transforms and reports the distance (mm) to the ground-truth landmark.
/// Out-of-bounds transfers are clamped into the image (flagged).
struct LandmarkErrorReport {
    std::vector<std::array<double, 4>> per_frame;  // [frame][landmark], mm
    bool clamped = false;
};

inline LandmarkErrorReport landmark_error(const LandmarkSet& gt, const DisplacementFieldSet& fields,
                                          int reference_frame, vec2 spacing = {1.0, 1.0},
                                          double inversion_tol = 0.01, int inversion_max_iters = 100) {
    int t_count = fields.frame_count();
    if (gt.frame_count() != t_count)
        throw validation_error("landmark_error: landmark/field frame count mismatch");
    if (reference_frame < 0 || reference_frame >= t_count)
        throw validation_error("landmark_error: reference frame out of range");
    int w = fields.width(), h = fields.height();

    warp::InversionResult inv_ref =
        warp::invert_field(fields.fields[reference_frame], inversion_tol, inversion_max_iters);
    LandmarkErrorReport report;
    report.per_frame.resize(t_count);
    for (int n = 0; n < t_count; ++n) {
        Field rel = n == reference_frame ? zero_field(w, h)
                                         : warp::compose(fields.fields[n], inv_ref.field);
        for (int l = 0; l < 4; ++l) {
            vec2 p = gt.points[reference_frame][l];
            vec2 moved = p + warp::sample(rel, p.x, p.y);
            vec2 clamped{std::clamp(moved.x, 0.0, w - 1.0), std::clamp(moved.y, 0.0, h - 1.0)};
            if (!(clamped == moved)) report.clamped = true;
            vec2 d = clamped - gt.points[n][l];
            report.per_frame[n][l] = std::sqrt(d.x * spacing.x * d.x * spacing.x +
                                               d.y * spacing.y * d.y * spacing.y);
        }
    }
    return report;
}

/// Pooled Jacobian-determinant statistics over all frames and pixels:
/// population standard deviation and the fraction of det <= 0.
inline std::pair<double, double> jacobian_stats(const DisplacementFieldSet& fields) {
    std::vector<Image> dets = warp::jacobian_determinant(fields);
    double sum = 0.0, count = 0.0;
    for (const auto& d : dets)
        for (double v : d) {
            sum += v;
            count += 1.0;
        }
    double mean = sum / count;
    double var = 0.0, folded = 0.0;
    for (const auto& d : dets)
        for (double v : d) {
            var += (v - mean) * (v - mean);
            if (v <= 0.0) folded += 1.0;
        }
    return {std::sqrt(var / count), folded / count};
}

/// Bland-Altman agreement: bias = mean(x - y), limits = bias +/- 1.96 sample
/// standard deviations of the differences.
struct BlandAltman {
    double bias = 0.0;
    double loa_low = 0.0;
    double loa_high = 0.0;
};

inline BlandAltman bland_altman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw validation_error("bland_altman: length mismatch");
    if (x.size() < 2) throw validation_error("bland_altman: needs at least 2 pairs");
    double bias = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) bias += x[i] - y[i];
    bias /= static_cast<double>(x.size());
    double var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i] - bias;
        var += d * d;
    }
    double sd = std::sqrt(var / static_cast<double>(x.size() - 1));
    return {bias, bias - 1.96 * sd, bias + 1.96 * sd};
}

// ---------------------------------------------------------------------------

struct MetricStats {
    double mean = 0.0;
    double stddev = 0.0;
};

inline MetricStats stats_of(const std::vector<double>& values) {
    MetricStats s;
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    for (double v : values) s.stddev += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(s.stddev / static_cast<double>(values.size()));
    return s;
}

/// Everything the evaluation tables report: per-structure DSC/MCD/HD over all
/// frames and at ES only, per-landmark transfer error, and DVF quality.
struct MetricReport {
    std::array<MetricStats, kNumStructures> dsc, mcd_mm, hd_mm;
    std::array<MetricStats, kNumStructures> dsc_es, mcd_es, hd_es;
    std::array<MetricStats, 4> landmark_mm, landmark_es;
    bool has_landmarks = false;
    double jacobian_std = 0.0;
    double folding_fraction = 0.0;
    bool has_jacobian = false;
    int es_frame = 0;
};

inline MetricReport compute_metric_report(const LabelMaskSet& predicted, const LabelMaskSet& reference,
                                          int es_frame, vec2 spacing = {1.0, 1.0},
                                          const LandmarkSet* landmarks = nullptr,
                                          const DisplacementFieldSet* fields = nullptr,
                                          int reference_frame = 0) {
    if (predicted.frame_count() != reference.frame_count())
        throw validation_error("compute_metric_report: frame count mismatch");
    int t_count = predicted.frame_count();
    if (es_frame < 0 || es_frame >= t_count)
        throw validation_error("compute_metric_report: ES frame out of range");

    MetricReport report;
    report.es_frame = es_frame;
    for (int k = 1; k <= kNumStructures; ++k) {
        std::vector<double> dscs, mcds, hds;
        std::vector<double> dscs_es, mcds_es, hds_es;
        for (int n = 0; n < t_count; ++n) {
            double d = dsc_metric(predicted.labels[n], reference.labels[n], k);
            dscs.push_back(d);
            bool have_both = false;
            double m = 0.0, hh = 0.0;
            try {
                Contour ca = anatomy::extract_contour(predicted.labels[n], k, n);
                Contour cb = anatomy::extract_contour(reference.labels[n], k, n);
                m = mcd(ca, cb, spacing);
                hh = hd(ca, cb, spacing);
                have_both = true;
            } catch (const validation_error&) {
                // structure absent or degenerate in one of the masks; contour
                // metrics are skipped for that frame
            }
            if (have_both) {
                mcds.push_back(m);
                hds.push_back(hh);
                if (n == es_frame) {
                    mcds_es.push_back(m);
                    hds_es.push_back(hh);
                }
            }
            if (n == es_frame) dscs_es.push_back(d);
        }
        report.dsc[k - 1] = stats_of(dscs);
        report.mcd_mm[k - 1] = stats_of(mcds);
        report.hd_mm[k - 1] = stats_of(hds);
        report.dsc_es[k - 1] = stats_of(dscs_es);
        report.mcd_es[k - 1] = stats_of(mcds_es);
        report.hd_es[k - 1] = stats_of(hds_es);
    }

    if (landmarks && fields) {
        auto lm = landmark_error(*landmarks, *fields, reference_frame, spacing);
        report.has_landmarks = true;
        for (int l = 0; l < 4; ++l) {
            std::vector<double> values, values_es;
            for (int n = 0; n < t_count; ++n) {
                values.push_back(lm.per_frame[n][l]);
                if (n == es_frame) values_es.push_back(lm.per_frame[n][l]);
            }
            report.landmark_mm[l] = stats_of(values);
            report.landmark_es[l] = stats_of(values_es);
        }
    }
    if (fields) {
        auto [jstd, fold] = jacobian_stats(*fields);
        report.jacobian_std = jstd;
        report.folding_fraction = fold;
        report.has_jacobian = true;
    }
    return report;
}

}  // namespace cinegroup::eval
