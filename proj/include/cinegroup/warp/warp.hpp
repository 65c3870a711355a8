#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"

namespace cinegroup::warp {

// All sampling uses bilinear interpolation with replicate-edge borders:
// coordinates are clamped to [0, W-1] x [0, H-1] before the 2x2 lookup.

namespace detail {

struct BilinearCell {
    int x0, y0;      // top-left corner, x0+1 and y0+1 are valid
    double fx, fy;   // fractional offsets in [0, 1]
    bool clamped_x;  // coordinate fell outside [0, W-1]
    bool clamped_y;
};

template <typename T>
inline BilinearCell locate(const grid<T>& g, double x, double y) {
    BilinearCell c;
    double cx = std::clamp(x, 0.0, static_cast<double>(g.width() - 1));
    double cy = std::clamp(y, 0.0, static_cast<double>(g.height() - 1));
    c.clamped_x = cx != x;
    c.clamped_y = cy != y;
    c.x0 = std::min(static_cast<int>(cx), g.width() - 2);
    c.y0 = std::min(static_cast<int>(cy), g.height() - 2);
    if (g.width() == 1) c.x0 = 0;
    if (g.height() == 1) c.y0 = 0;
    c.fx = cx - c.x0;
    c.fy = cy - c.y0;
    return c;
}

}  // namespace detail

inline double sample(const Image& img, double x, double y) {
    auto c = detail::locate(img, x, y);
    int x1 = std::min(c.x0 + 1, img.width() - 1);
    int y1 = std::min(c.y0 + 1, img.height() - 1);
    double v00 = img(c.x0, c.y0), v10 = img(x1, c.y0);
    double v01 = img(c.x0, y1), v11 = img(x1, y1);
    return (1 - c.fy) * ((1 - c.fx) * v00 + c.fx * v10) + c.fy * ((1 - c.fx) * v01 + c.fx * v11);
}

/// Sample plus the derivative of the sampled value with respect to the
/// (unclamped) coordinates; zero in a direction that was clamped.
inline double sample_grad(const Image& img, double x, double y, double& dvdx, double& dvdy) {
    auto c = detail::locate(img, x, y);
    int x1 = std::min(c.x0 + 1, img.width() - 1);
    int y1 = std::min(c.y0 + 1, img.height() - 1);
    double v00 = img(c.x0, c.y0), v10 = img(x1, c.y0);
    double v01 = img(c.x0, y1), v11 = img(x1, y1);
    double v = (1 - c.fy) * ((1 - c.fx) * v00 + c.fx * v10) + c.fy * ((1 - c.fx) * v01 + c.fx * v11);
    dvdx = c.clamped_x ? 0.0 : (1 - c.fy) * (v10 - v00) + c.fy * (v11 - v01);
    dvdy = c.clamped_y ? 0.0 : (1 - c.fx) * (v01 - v00) + c.fx * (v11 - v10);
    return v;
}

/// Adjoint of sampling with respect to the sampled image: distributes g over
/// the four corners with the bilinear weights.
inline void scatter(Image& acc, double x, double y, double g) {
    auto c = detail::locate(acc, x, y);
    int x1 = std::min(c.x0 + 1, acc.width() - 1);
    int y1 = std::min(c.y0 + 1, acc.height() - 1);
    acc(c.x0, c.y0) += (1 - c.fx) * (1 - c.fy) * g;
    acc(x1, c.y0) += c.fx * (1 - c.fy) * g;
    acc(c.x0, y1) += (1 - c.fx) * c.fy * g;
    acc(x1, y1) += c.fx * c.fy * g;
}

inline vec2 sample(const Field& f, double x, double y) {
    auto c = detail::locate(f, x, y);
    int x1 = std::min(c.x0 + 1, f.width() - 1);
    int y1 = std::min(c.y0 + 1, f.height() - 1);
    vec2 v00 = f(c.x0, c.y0), v10 = f(x1, c.y0);
    vec2 v01 = f(c.x0, y1), v11 = f(x1, y1);
    return (1 - c.fy) * ((1 - c.fx) * v00 + c.fx * v10) + c.fy * ((1 - c.fx) * v01 + c.fx * v11);
}

/// Field sample plus its 2x2 spatial Jacobian d(sampled field)/d(x, y).
inline vec2 sample_grad(const Field& f, double x, double y, vec2& ddx, vec2& ddy) {
    auto c = detail::locate(f, x, y);
    int x1 = std::min(c.x0 + 1, f.width() - 1);
    int y1 = std::min(c.y0 + 1, f.height() - 1);
    vec2 v00 = f(c.x0, c.y0), v10 = f(x1, c.y0);
    vec2 v01 = f(c.x0, y1), v11 = f(x1, y1);
    vec2 v = (1 - c.fy) * ((1 - c.fx) * v00 + c.fx * v10) + c.fy * ((1 - c.fx) * v01 + c.fx * v11);
    ddx = c.clamped_x ? vec2{0, 0} : (1 - c.fy) * (v10 - v00) + c.fy * (v11 - v01);
    ddy = c.clamped_y ? vec2{0, 0} : (1 - c.fx) * (v01 - v00) + c.fx * (v11 - v10);
    return v;
}

inline void scatter(Field& acc, double x, double y, const vec2& g) {
    auto c = detail::locate(acc, x, y);
    int x1 = std::min(c.x0 + 1, acc.width() - 1);
    int y1 = std::min(c.y0 + 1, acc.height() - 1);
    acc(c.x0, c.y0) += (1 - c.fx) * (1 - c.fy) * g;
    acc(x1, c.y0) += c.fx * (1 - c.fy) * g;
    acc(c.x0, y1) += (1 - c.fx) * c.fy * g;
    acc(x1, y1) += c.fx * c.fy * g;
}

// ---------------------------------------------------------------------------

/// Backward warp: out(x) = image(x + field(x)).
inline Image warp_image(const Image& image, const Field& field) {
    if (!image.same_shape(field)) throw validation_error("warp_image: shape mismatch");
    Image out(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) {
            vec2 d = field(x, y);
            out(x, y) = sample(image, x + d.x, y + d.y);
        }
    return out;
}

/// Warps each label's indicator bilinearly and takes the per-pixel argmax;
/// ties resolve to the smaller label index.
inline LabelImage warp_mask(const LabelImage& mask, const Field& field) {
    if (mask.width() != field.width() || mask.height() != field.height())
        throw validation_error("warp_mask: shape mismatch");
    int w = mask.width(), h = mask.height();
    LabelImage out(w, h);
    std::vector<Image> indicators(kNumStructures + 1, Image(w, h, 0.0));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) indicators[mask(x, y)](x, y) = 1.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            vec2 d = field(x, y);
            double best = -1.0;
            std::uint8_t best_label = 0;
            for (int k = 0; k <= kNumStructures; ++k) {
                double v = sample(indicators[k], x + d.x, y + d.y);
                if (v > best) {
                    best = v;
                    best_label = static_cast<std::uint8_t>(k);
                }
            }
            out(x, y) = best_label;
        }
    return out;
}

/// Composition T_outer o T_inner as a displacement field:
/// result(x) = inner(x) + outer(x + inner(x)).
inline Field compose(const Field& outer, const Field& inner) {
    if (!outer.same_shape(inner)) throw validation_error("compose: shape mismatch");
    Field out(outer.width(), outer.height());
    for (int y = 0; y < outer.height(); ++y)
        for (int x = 0; x < outer.width(); ++x) {
            vec2 d = inner(x, y);
            out(x, y) = d + sample(outer, x + d.x, y + d.y);
        }
    return out;
}

struct InversionResult {
    Field field;
    int iterations = 0;
    double residual = 0.0;  // max per-pixel update magnitude at the last iterate
    bool converged = false;
};

/// Fixed-point inversion: v_{k+1}(x) = -field(x + v_k(x)), starting from
/// v_0 = 0, until the max per-pixel update drops below tol or max_iters is
/// reached. Non-convergence is reported, not thrown.
inline InversionResult invert_field(const Field& field, double tol = 0.01, int max_iters = 100) {
    InversionResult r;
    r.field = zero_field(field.width(), field.height());
    Field next(field.width(), field.height());
    for (int k = 0; k < max_iters; ++k) {
        double max_update = 0.0;
        for (int y = 0; y < field.height(); ++y)
            for (int x = 0; x < field.width(); ++x) {
                vec2 v = r.field(x, y);
                vec2 nv = -1.0 * sample(field, x + v.x, y + v.y);
                next(x, y) = nv;
                max_update = std::max(max_update, norm(nv - v));
            }
        std::swap(r.field, next);
        r.iterations = k + 1;
        r.residual = max_update;
        if (max_update < tol) {
            r.converged = true;
            break;
        }
    }
    return r;
}

/// Relative transform T_i o T_j^{-1} as a displacement field on frame j's
/// grid. Warping frame-i content with it resamples that content onto frame
/// j's grid; adding it to a frame-j point carries the point to frame i.
inline Field relative_field(int i, int j, const DisplacementFieldSet& fields,
                            double tol = 0.01, int max_iters = 100) {
    if (i < 0 || j < 0 || i >= fields.frame_count() || j >= fields.frame_count())
        throw validation_error("relative_field: frame index out of range");
    InversionResult inv = invert_field(fields.fields[j], tol, max_iters);
    return compose(fields.fields[i], inv.field);
}

/// Determinant of the Jacobian of T(x) = x + field(x); central differences in
/// the interior, one-sided at the borders.
inline Image jacobian_determinant(const Field& field) {
    int w = field.width(), h = field.height();
    if (w < 3 || h < 3) throw validation_error("jacobian_determinant: field must be at least 3x3");
    Image det(w, h);
    auto dx = [&](int x, int y) -> vec2 {
        if (x == 0) return field(1, y) - field(0, y);
        if (x == w - 1) return field(w - 1, y) - field(w - 2, y);
        return 0.5 * (field(x + 1, y) - field(x - 1, y));
    };
    auto dy = [&](int x, int y) -> vec2 {
        if (y == 0) return field(x, 1) - field(x, 0);
        if (y == h - 1) return field(x, h - 1) - field(x, h - 2);
        return 0.5 * (field(x, y + 1) - field(x, y - 1));
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            vec2 gx = dx(x, y), gy = dy(x, y);
            det(x, y) = (1.0 + gx.x) * (1.0 + gy.y) - gx.y * gy.x;
        }
    return det;
}

inline std::vector<Image> jacobian_determinant(const DisplacementFieldSet& fields) {
    std::vector<Image> out;
    out.reserve(fields.fields.size());
    for (const auto& f : fields.fields) out.push_back(jacobian_determinant(f));
    return out;
}

}  // namespace cinegroup::warp
