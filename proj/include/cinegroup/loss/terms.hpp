#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"
#include "cinegroup/loss/lncc.hpp"

namespace cinegroup::loss {

using ProbStack = std::vector<std::vector<Image>>;  // [frame][channel], channel 0 = background

// ---------------------------------------------------------------------------
// Smoothness: Charbonnier-smoothed l1 norm of the spatial forward differences
// of each frame's displacement, averaged as 1/(2 N |Omega|). The gradient at
// the last row/column is defined as zero.

inline double smoothness_loss(const FieldStack& fields, double charbonnier_eps,
                              FieldStack* grad = nullptr, double coef = 1.0) {
    if (fields.empty()) throw validation_error("smoothness_loss: empty field set");
    int w = fields.front().width(), h = fields.front().height();
    double norm = 1.0 / (2.0 * fields.size() * static_cast<double>(w) * h);
    double e2 = charbonnier_eps * charbonnier_eps;
    double acc = 0.0;
    for (std::size_t n = 0; n < fields.size(); ++n) {
        const Field& f = fields[n];
        Field* g = grad ? &(*grad)[n] : nullptr;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                vec2 dx = x + 1 < w ? f(x + 1, y) - f(x, y) : vec2{0, 0};
                vec2 dy = y + 1 < h ? f(x, y + 1) - f(x, y) : vec2{0, 0};
                double cxx = std::sqrt(dx.x * dx.x + e2), cxy = std::sqrt(dx.y * dx.y + e2);
                double cyx = std::sqrt(dy.x * dy.x + e2), cyy = std::sqrt(dy.y * dy.y + e2);
                acc += cxx + cxy + cyx + cyy;
                if (g) {
                    double s = coef * norm;
                    if (x + 1 < w) {
                        vec2 d{s * dx.x / cxx, s * dx.y / cxy};
                        (*g)(x + 1, y) += d;
                        (*g)(x, y) -= d;
                    }
                    if (y + 1 < h) {
                        vec2 d{s * dy.x / cyx, s * dy.y / cyy};
                        (*g)(x, y + 1) += d;
                        (*g)(x, y) -= d;
                    }
                }
            }
    }
    return acc * norm;
}

// ---------------------------------------------------------------------------
// Cyclic constraint: RMS-style norm of the per-pixel sum of displacements
// across the cycle, sqrt( 1/(2 N |Omega|) * sum_x ||sum_n phi_n(x)||^2 ).

inline double cyclic_loss(const FieldStack& fields, FieldStack* grad = nullptr, double coef = 1.0) {
    if (fields.empty()) throw validation_error("cyclic_loss: empty field set");
    int w = fields.front().width(), h = fields.front().height();
    Field total(w, h, vec2{0, 0});
    for (const auto& f : fields)
        for (std::size_t i = 0; i < f.size(); ++i) total[i] += f[i];
    double norm = 1.0 / (2.0 * fields.size() * static_cast<double>(w) * h);
    double q = 0.0;
    for (const auto& v : total) q += norm_sq(v);
    q *= norm;
    double value = std::sqrt(q);
    if (grad && value > 1e-30) {
        double s = coef * norm / value;
        for (auto& g : *grad)
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * total[i];
    }
    return value;
}

// ---------------------------------------------------------------------------
// Segmentation losses. Soft Dice averages 1 - dice over the K foreground
// structures; cross-entropy averages -log p(true class) over all pixels.

inline double dice_loss(const ProbStack& pred, const LabelStack& gt) {
    if (pred.size() != gt.size()) throw validation_error("dice_loss: frame count mismatch");
    double acc = 0.0;
    for (int k = 1; k <= kNumStructures; ++k) {
        double inter = 0.0, psum = 0.0, gsum = 0.0;
        for (std::size_t n = 0; n < gt.size(); ++n) {
            if (pred[n].size() != kNumStructures + 1)
                throw validation_error("dice_loss: expected K+1 prediction channels");
            const Image& p = pred[n][k];
            if (p.width() != gt[n].width() || p.height() != gt[n].height())
                throw validation_error("dice_loss: shape mismatch");
            for (std::size_t i = 0; i < p.size(); ++i) {
                double gv = gt[n][i] == k ? 1.0 : 0.0;
                inter += p[i] * gv;
                psum += p[i];
                gsum += gv;
            }
        }
        acc += 2.0 * inter / (psum + gsum + 1e-7);
    }
    return 1.0 - acc / kNumStructures;
}

inline double dice_loss(const LabelStack& pred, const LabelStack& gt) {
    if (pred.size() != gt.size()) throw validation_error("dice_loss: frame count mismatch");
    double acc = 0.0;
    for (int k = 1; k <= kNumStructures; ++k) {
        double inter = 0.0, psum = 0.0, gsum = 0.0;
        for (std::size_t n = 0; n < gt.size(); ++n) {
            if (!pred[n].same_shape(gt[n])) throw validation_error("dice_loss: shape mismatch");
            for (std::size_t i = 0; i < pred[n].size(); ++i) {
                bool pv = pred[n][i] == k, gv = gt[n][i] == k;
                inter += (pv && gv) ? 1.0 : 0.0;
                psum += pv ? 1.0 : 0.0;
                gsum += gv ? 1.0 : 0.0;
            }
        }
        acc += 2.0 * inter / (psum + gsum + 1e-7);
    }
    return 1.0 - acc / kNumStructures;
}

/// Mean over pixels of -log p(true class), probabilities clamped to
/// [1e-12, 1]. When `grad` is given, accumulates coef * d/d p into it.
inline double ce_loss(const ProbStack& pred, const LabelStack& gt,
                      ProbStack* grad = nullptr, double coef = 1.0) {
    if (pred.size() != gt.size()) throw validation_error("ce_loss: frame count mismatch");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < gt.size(); ++n) count += gt[n].size();
    double inv_count = 1.0 / static_cast<double>(count);
    for (std::size_t n = 0; n < gt.size(); ++n) {
        if (pred[n].size() != kNumStructures + 1)
            throw validation_error("ce_loss: expected K+1 prediction channels");
        for (std::size_t i = 0; i < gt[n].size(); ++i) {
            int k = gt[n][i];
            double p = pred[n][k][i];
            double pc = std::clamp(p, 1e-12, 1.0);
            acc -= std::log(pc);
            if (grad && p > 1e-12 && p <= 1.0)
                (*grad)[n][k][i] += coef * inv_count * (-1.0 / pc);
        }
    }
    return acc * inv_count;
}

inline double dice_loss(const ProbabilityMaskSet& pred, const LabelMaskSet& gt) {
    return dice_loss(pred.probs, gt.labels);
}
inline double dice_loss(const LabelMaskSet& pred, const LabelMaskSet& gt) {
    return dice_loss(pred.labels, gt.labels);
}
inline double ce_loss(const ProbabilityMaskSet& pred, const LabelMaskSet& gt) {
    return ce_loss(pred.probs, gt.labels);
}

// ---------------------------------------------------------------------------
// Distance-map similarity: 1 - mean over frames and structures of the LNCC
// between each warped distance map and the per-structure template map.

inline double distance_similarity_loss(const std::vector<std::vector<Image>>& warped_maps,
                                       const std::vector<Image>& template_maps, int window) {
    if (warped_maps.empty()) throw validation_error("distance_similarity_loss: empty map set");
    if (template_maps.size() != kNumStructures)
        throw validation_error("distance_similarity_loss: expected K template maps");
    double acc = 0.0;
    for (const auto& frame : warped_maps) {
        if (frame.size() != kNumStructures)
            throw validation_error("distance_similarity_loss: expected K maps per frame");
        for (int k = 0; k < kNumStructures; ++k) acc += lncc(frame[k], template_maps[k], window);
    }
    return 1.0 - acc / (static_cast<double>(warped_maps.size()) * kNumStructures);
}

}  // namespace cinegroup::loss
