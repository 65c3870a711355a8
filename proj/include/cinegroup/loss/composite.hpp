#pragma once

#include <cmath>
#include <vector>

#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"
#include "cinegroup/loss/lncc.hpp"
#include "cinegroup/loss/templates.hpp"
#include "cinegroup/loss/terms.hpp"
#include "cinegroup/warp/warp.hpp"

namespace cinegroup::loss {

/// Unweighted values of every loss term; `total` applies the configured
/// weights: similarity + l0*smoothness + l1*cyclic + w0*similarity_d
/// + w1*seg_r + w2*seg_s.
struct LossBreakdown {
    double similarity = 0.0;
    double smoothness = 0.0;
    double cyclic = 0.0;
    double similarity_d = 0.0;
    double seg_r = 0.0;
    double seg_s = 0.0;
    double total = 0.0;
};

/// Anatomical guidance for one resolution level: the provided per-frame
/// masks, their distance maps, and the propagation source frame.
struct GuidanceData {
    const LabelStack* masks = nullptr;
    const std::vector<std::vector<Image>>* distance_maps = nullptr;  // [frame][structure]
    int ed_frame = 0;
};

namespace detail {

struct InversionTrace {
    std::vector<Field> bases;  // v_0 .. v_{K-1}, the sampling bases of each step
    Field result;              // v_K
};

inline InversionTrace invert_traced(const Field& field, double tol, int max_iters) {
    InversionTrace tr;
    Field v = zero_field(field.width(), field.height());
    for (int k = 0; k < max_iters; ++k) {
        tr.bases.push_back(v);
        Field next(field.width(), field.height());
        double max_update = 0.0;
        for (int y = 0; y < field.height(); ++y)
            for (int x = 0; x < field.width(); ++x) {
                vec2 nv = -1.0 * warp::sample(field, x + v(x, y).x, y + v(x, y).y);
                next(x, y) = nv;
                max_update = std::max(max_update, norm(nv - v(x, y)));
            }
        v = std::move(next);
        if (max_update < tol) break;
    }
    tr.result = std::move(v);
    return tr;
}

/// Pulls a cotangent on the inverse field back to the forward field through
/// the recorded fixed-point iterates.
inline void invert_vjp(const Field& field, const InversionTrace& tr, Field bar_v, Field& grad_field) {
    for (int k = static_cast<int>(tr.bases.size()) - 1; k >= 0; --k) {
        const Field& base = tr.bases[k];
        Field next_bar(field.width(), field.height(), vec2{0, 0});
        for (int y = 0; y < field.height(); ++y)
            for (int x = 0; x < field.width(); ++x) {
                vec2 bv = bar_v(x, y);
                if (bv.x == 0.0 && bv.y == 0.0) continue;
                double cx = x + base(x, y).x, cy = y + base(x, y).y;
                warp::scatter(grad_field, cx, cy, -1.0 * bv);
                vec2 ddx, ddy;
                warp::sample_grad(field, cx, cy, ddx, ddy);
                next_bar(x, y) = vec2{-(ddx.x * bv.x + ddx.y * bv.y), -(ddy.x * bv.x + ddy.y * bv.y)};
            }
        bar_v = std::move(next_bar);
        // bases[0] is the zero field; its cotangent is discarded
    }
}

inline void warp_vjp(const Image& source, const Field& field, const Image& bar_out, Field& grad_field) {
    for (int y = 0; y < field.height(); ++y)
        for (int x = 0; x < field.width(); ++x) {
            double b = bar_out(x, y);
            if (b == 0.0) continue;
            vec2 d = field(x, y);
            double gx, gy;
            warp::sample_grad(source, x + d.x, y + d.y, gx, gy);
            grad_field(x, y) += vec2{b * gx, b * gy};
        }
}

}  // namespace detail

/// Evaluates the full groupwise objective (and, when `grad` is non-null, its
/// analytic gradient with respect to every displacement component). Without
/// guidance the anatomical terms are zero. seg_s is fixed at zero: no learned
/// segmenter exists in this pipeline, the weight w2 is kept for interface
/// parity.
inline LossBreakdown composite_loss(const ImageStack& frames, const FieldStack& fields,
                                    const RegistrationConfig& cfg,
                                    const GuidanceData* guide = nullptr,
                                    FieldStack* grad = nullptr, int threads = 1) {
    if (frames.size() < 2) throw validation_error("composite_loss: needs at least 2 frames");
    if (fields.size() != frames.size())
        throw validation_error("composite_loss: field/frame count mismatch");
    int t_count = static_cast<int>(frames.size());
    int w = frames.front().width(), h = frames.front().height();
    for (int n = 0; n < t_count; ++n)
        if (!frames[n].same_shape(fields[n]) || !frames[n].same_shape(frames.front()))
            throw validation_error("composite_loss: shape mismatch");
    if (guide) {
        if (guide->masks && static_cast<int>(guide->masks->size()) != t_count)
            throw validation_error("composite_loss: guidance mask count mismatch");
        if (guide->distance_maps && static_cast<int>(guide->distance_maps->size()) != t_count)
            throw validation_error("composite_loss: guidance distance-map count mismatch");
        if (guide->ed_frame < 0 || guide->ed_frame >= t_count)
            throw validation_error("composite_loss: guidance ED frame out of range");
    }
    if (grad) {
        grad->assign(t_count, zero_field(w, h));
    }

    LossBreakdown out;
    double inv_t = 1.0 / static_cast<double>(t_count);

    // ---- image similarity --------------------------------------------------
    ImageStack warped(t_count);
    parallel_for(t_count, threads, [&](int n) { warped[n] = warp::warp_image(frames[n], fields[n]); });

    TemplateImage tmpl = cfg.template_mode == TemplateMode::pca ? pca_template(warped)
                                                                : average_template(warped);

    std::vector<double> cc(t_count, 0.0);
    ImageStack bar_warped, bar_tmpl_parts;
    if (grad) {
        bar_warped.assign(t_count, Image(w, h, 0.0));
        bar_tmpl_parts.assign(t_count, Image(w, h, 0.0));
    }
    parallel_for(t_count, threads, [&](int n) {
        if (grad)
            cc[n] = lncc_grad(warped[n], tmpl.pixels, cfg.lncc_window, -inv_t,
                              &bar_warped[n], &bar_tmpl_parts[n]);
        else
            cc[n] = lncc(warped[n], tmpl.pixels, cfg.lncc_window);
    });
    double cc_sum = 0.0;
    for (int n = 0; n < t_count; ++n) cc_sum += cc[n];
    out.similarity = 1.0 - cc_sum * inv_t;

    if (grad) {
        Image bar_tmpl(w, h, 0.0);
        for (int n = 0; n < t_count; ++n)
            for (std::size_t i = 0; i < bar_tmpl.size(); ++i) bar_tmpl[i] += bar_tmpl_parts[n][i];
        // template is a fixed linear combination of the warped frames; PCA
        // weights are treated as constants in the gradient
        for (int n = 0; n < t_count; ++n)
            for (std::size_t i = 0; i < bar_tmpl.size(); ++i)
                bar_warped[n][i] += tmpl.weights[n] * bar_tmpl[i];
        parallel_for(t_count, threads, [&](int n) {
            detail::warp_vjp(frames[n], fields[n], bar_warped[n], (*grad)[n]);
        });
    }

    // ---- regularizers ------------------------------------------------------
    out.smoothness = smoothness_loss(fields, cfg.charbonnier_eps, grad, cfg.lambda0);
    out.cyclic = cyclic_loss(fields, grad, cfg.lambda1);

    // ---- distance-map similarity -------------------------------------------
    bool have_maps = guide && guide->distance_maps && cfg.w0 > 0.0;
    if (have_maps) {
        const auto& dmaps = *guide->distance_maps;
        double inv_tk = 1.0 / (static_cast<double>(t_count) * kNumStructures);
        std::vector<std::vector<Image>> warped_maps(t_count);
        parallel_for(t_count, threads, [&](int n) {
            warped_maps[n].reserve(kNumStructures);
            for (int k = 0; k < kNumStructures; ++k)
                warped_maps[n].push_back(warp::warp_image(dmaps[n][k], fields[n]));
        });
        std::vector<Image> tmpl_maps(kNumStructures, Image(w, h, 0.0));
        for (int k = 0; k < kNumStructures; ++k) {
            for (int n = 0; n < t_count; ++n)
                for (std::size_t i = 0; i < tmpl_maps[k].size(); ++i)
                    tmpl_maps[k][i] += warped_maps[n][k][i];
            for (auto& v : tmpl_maps[k]) v *= inv_t;
        }
        std::vector<double> dcc(t_count, 0.0);
        std::vector<std::vector<Image>> bar_wmaps;
        std::vector<std::vector<Image>> bar_tmpl_map_parts;
        if (grad) {
            bar_wmaps.assign(t_count, std::vector<Image>(kNumStructures, Image(w, h, 0.0)));
            bar_tmpl_map_parts.assign(t_count, std::vector<Image>(kNumStructures, Image(w, h, 0.0)));
        }
        parallel_for(t_count, threads, [&](int n) {
            double s = 0.0;
            for (int k = 0; k < kNumStructures; ++k) {
                if (grad)
                    s += lncc_grad(warped_maps[n][k], tmpl_maps[k], cfg.lncc_window, -cfg.w0 * inv_tk,
                                   &bar_wmaps[n][k], &bar_tmpl_map_parts[n][k]);
                else
                    s += lncc(warped_maps[n][k], tmpl_maps[k], cfg.lncc_window);
            }
            dcc[n] = s;
        });
        double dcc_sum = 0.0;
        for (int n = 0; n < t_count; ++n) dcc_sum += dcc[n];
        out.similarity_d = 1.0 - dcc_sum * inv_tk;

        if (grad) {
            // the gradient above carries weight w0 already; the similarity_d
            // value itself stays unweighted
            for (int k = 0; k < kNumStructures; ++k) {
                Image bar_tm(w, h, 0.0);
                for (int n = 0; n < t_count; ++n)
                    for (std::size_t i = 0; i < bar_tm.size(); ++i)
                        bar_tm[i] += bar_tmpl_map_parts[n][k][i];
                for (int n = 0; n < t_count; ++n)
                    for (std::size_t i = 0; i < bar_tm.size(); ++i)
                        bar_wmaps[n][k][i] += inv_t * bar_tm[i];
            }
            parallel_for(t_count, threads, [&](int n) {
                for (int k = 0; k < kNumStructures; ++k)
                    detail::warp_vjp(dmaps[n][k], fields[n], bar_wmaps[n][k], (*grad)[n]);
            });
        }
    }

    // ---- propagated-segmentation loss ---------------------------------------
    bool have_seg = guide && guide->masks && cfg.w1 > 0.0;
    if (have_seg) {
        const LabelStack& gt = *guide->masks;
        int r = guide->ed_frame;
        std::vector<Image> onehot(kNumStructures + 1, Image(w, h, 0.0));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) onehot[gt[r](x, y)](x, y) = 1.0;

        ProbStack soft(t_count);
        LabelStack hard(t_count);
        std::vector<detail::InversionTrace> inv_traces(t_count);
        FieldStack rel(t_count);
        parallel_for(t_count, threads, [&](int n) {
            if (n == r) {
                soft[n] = onehot;
                hard[n] = gt[r];
                return;
            }
            inv_traces[n] = detail::invert_traced(fields[n], cfg.inversion_tol, cfg.inversion_max_iters);
            rel[n] = warp::compose(fields[r], inv_traces[n].result);
            soft[n].assign(kNumStructures + 1, Image(w, h, 0.0));
            hard[n] = LabelImage(w, h, 0);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    vec2 d = rel[n](x, y);
                    double best = -1.0;
                    std::uint8_t best_k = 0;
                    for (int k = 0; k <= kNumStructures; ++k) {
                        double v = warp::sample(onehot[k], x + d.x, y + d.y);
                        soft[n][k](x, y) = v;
                        if (v > best) {
                            best = v;
                            best_k = static_cast<std::uint8_t>(k);
                        }
                    }
                    hard[n](x, y) = best_k;
                }
        });

        // Dice on the hard propagated masks (piecewise constant in the fields,
        // so it contributes no gradient), cross-entropy on the soft ones.
        double dice_term = dice_loss(hard, gt);
        ProbStack bar_soft;
        if (grad) bar_soft.assign(t_count, std::vector<Image>(kNumStructures + 1, Image(w, h, 0.0)));
        double ce_term = ce_loss(soft, gt, grad ? &bar_soft : nullptr, cfg.w1);
        out.seg_r = dice_term + ce_term;

        if (grad) {
            FieldStack bar_phi_r_parts(t_count);
            parallel_for(t_count, threads, [&](int n) {
                if (n == r) return;
                // cotangent on the relative field via the sampled one-hot maps
                Field bar_rel(w, h, vec2{0, 0});
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        int k = gt[n](x, y);
                        double b = bar_soft[n][k](x, y);
                        if (b == 0.0) continue;
                        vec2 d = rel[n](x, y);
                        double gx, gy;
                        warp::sample_grad(onehot[k], x + d.x, y + d.y, gx, gy);
                        bar_rel(x, y) += vec2{b * gx, b * gy};
                    }
                // compose: rel(x) = inv(x) + phi_r(x + inv(x))
                Field bar_inv(w, h, vec2{0, 0});
                bar_phi_r_parts[n] = zero_field(w, h);
                const Field& inv = inv_traces[n].result;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        vec2 br = bar_rel(x, y);
                        if (br.x == 0.0 && br.y == 0.0) continue;
                        double cx = x + inv(x, y).x, cy = y + inv(x, y).y;
                        warp::scatter(bar_phi_r_parts[n], cx, cy, br);
                        vec2 ddx, ddy;
                        warp::sample_grad(fields[r], cx, cy, ddx, ddy);
                        bar_inv(x, y) = br + vec2{ddx.x * br.x + ddx.y * br.y,
                                                  ddy.x * br.x + ddy.y * br.y};
                    }
                detail::invert_vjp(fields[n], inv_traces[n], std::move(bar_inv), (*grad)[n]);
            });
            for (int n = 0; n < t_count; ++n) {
                if (n == r || bar_phi_r_parts[n].empty()) continue;
                for (std::size_t i = 0; i < bar_phi_r_parts[n].size(); ++i)
                    (*grad)[r][i] += bar_phi_r_parts[n][i];
            }
        }
    }

    out.seg_s = 0.0;
    out.total = out.similarity + cfg.lambda0 * out.smoothness + cfg.lambda1 * out.cyclic +
                cfg.w0 * out.similarity_d + cfg.w1 * out.seg_r + cfg.w2 * out.seg_s;
    return out;
}

/// Per-operation convenience wrapper over the stack-based overload.
inline LossBreakdown composite_loss(const CineSequence& sequence, const DisplacementFieldSet& fields,
                                    const RegistrationConfig& cfg,
                                    const GuidanceData* guide = nullptr,
                                    FieldStack* grad = nullptr, int threads = 1) {
    return composite_loss(sequence.frames, fields.fields, cfg, guide, grad, threads);
}

inline double similarity_loss(const ImageStack& warped, const Image& tmpl, int window) {
    if (warped.empty()) throw validation_error("similarity_loss: empty stack");
    double acc = 0.0;
    for (const auto& f : warped) acc += lncc(f, tmpl, window);
    return 1.0 - acc / static_cast<double>(warped.size());
}

}  // namespace cinegroup::loss
