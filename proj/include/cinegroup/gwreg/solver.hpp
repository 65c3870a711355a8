#pragma once

#include <chrono>
#include <cmath>
#include <utility>
#include <vector>

#include "cinegroup/anatomy/cardiac_indices.hpp"
#include "cinegroup/anatomy/distance_map.hpp"
#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"
#include "cinegroup/gwreg/resample.hpp"
#include "cinegroup/loss/composite.hpp"
#include "cinegroup/warp/warp.hpp"

namespace cinegroup::gwreg {

using loss::LossBreakdown;

struct LevelTrace {
    int level = 0;  // 0 is full resolution
    int width = 0, height = 0;
    std::vector<LossBreakdown> iterations;  // loss at the start of each step
    double initial_total = 0.0;
    double final_total = 0.0;
    double wall_clock_sec = 0.0;
};

struct OptimizationTrace {
    std::vector<LevelTrace> levels;  // coarsest first
    std::vector<double> final_inversion_residuals;  // per frame, full resolution
    bool inversions_converged = true;
    bool diverged = false;
};

namespace detail {

struct AdamState {
    FieldStack m, v;
    int step = 0;

    explicit AdamState(const FieldStack& like) {
        m.reserve(like.size());
        v.reserve(like.size());
        for (const auto& f : like) {
            m.push_back(zero_field(f.width(), f.height()));
            v.push_back(zero_field(f.width(), f.height()));
        }
    }

    void update(FieldStack& fields, const FieldStack& grad, const RegistrationConfig& cfg) {
        ++step;
        double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
        double corr1 = 1.0 - std::pow(b1, step);
        double corr2 = 1.0 - std::pow(b2, step);
        for (std::size_t n = 0; n < fields.size(); ++n)
            for (std::size_t i = 0; i < fields[n].size(); ++i) {
                vec2 g = grad[n][i];
                vec2& mm = m[n][i];
                vec2& vv = v[n][i];
                mm = b1 * mm + (1.0 - b1) * g;
                vv = vec2{b2 * vv.x + (1.0 - b2) * g.x * g.x, b2 * vv.y + (1.0 - b2) * g.y * g.y};
                vec2 mhat = (1.0 / corr1) * mm;
                vec2 vhat = (1.0 / corr2) * vv;
                fields[n][i].x -= cfg.learning_rate * mhat.x / (std::sqrt(vhat.x) + cfg.adam_eps);
                fields[n][i].y -= cfg.learning_rate * mhat.y / (std::sqrt(vhat.y) + cfg.adam_eps);
            }
    }
};

}  // namespace detail

/// Multi-resolution first-order optimization of the displacement fields under
/// the composite objective. The pyramid is built by repeated 2x box
/// downsampling; fields start at zero on the coarsest level, run
/// iterations_per_level Adam steps, then are bilinearly upsampled (values
/// doubled) to seed the next level. The best iterate of each level is carried
/// forward, so the final loss of a level never exceeds its initial loss.
/// Distance maps, when masks are given, are recomputed once per level from
/// the downsampled masks.
inline std::pair<DisplacementFieldSet, OptimizationTrace> register_groupwise(
    const CineSequence& sequence, const RegistrationConfig& cfg,
    const LabelMaskSet* masks = nullptr, int threads = 1) {
    cfg.validate();
    if (masks && (masks->frame_count() != sequence.frame_count() ||
                  masks->width() != sequence.width() || masks->height() != sequence.height()))
        throw validation_error("register_groupwise: mask shape mismatch");

    int t_count = sequence.frame_count();
    int ed_frame = masks ? anatomy::find_ed_es(*masks).first : 0;

    // pyramid, coarsest last
    std::vector<ImageStack> pyramid{sequence.frames};
    std::vector<LabelStack> mask_pyramid;
    if (masks) mask_pyramid.push_back(masks->labels);
    for (int l = 1; l < cfg.pyramid_levels; ++l) {
        ImageStack down(t_count);
        for (int n = 0; n < t_count; ++n) down[n] = downsample_image(pyramid.back()[n]);
        pyramid.push_back(std::move(down));
        if (masks) {
            LabelStack dm(t_count);
            for (int n = 0; n < t_count; ++n) dm[n] = downsample_mask(mask_pyramid.back()[n]);
            mask_pyramid.push_back(std::move(dm));
        }
    }

    OptimizationTrace trace;
    FieldStack fields;
    for (int level = cfg.pyramid_levels - 1; level >= 0; --level) {
        const ImageStack& frames = pyramid[level];
        int w = frames.front().width(), h = frames.front().height();
        if (fields.empty())
            fields.assign(t_count, zero_field(w, h));
        else {
            for (auto& f : fields) f = upsample_field(f, w, h);
        }

        // window cannot exceed the level size; shrink to the largest odd fit
        RegistrationConfig level_cfg = cfg;
        int max_window = std::min(w, h);
        if (level_cfg.lncc_window > max_window)
            level_cfg.lncc_window = max_window % 2 == 1 ? max_window : max_window - 1;

        std::vector<std::vector<Image>> dmaps;
        loss::GuidanceData guide;
        const loss::GuidanceData* guide_ptr = nullptr;
        if (masks) {
            dmaps = anatomy::distance_transform(mask_pyramid[level], threads);
            guide.masks = &mask_pyramid[level];
            guide.distance_maps = &dmaps;
            guide.ed_frame = ed_frame;
            guide_ptr = &guide;
        }

        LevelTrace lt;
        lt.level = level;
        lt.width = w;
        lt.height = h;
        auto t0 = std::chrono::steady_clock::now();

        FieldStack best = fields;
        double best_total = std::numeric_limits<double>::infinity();
        detail::AdamState adam(fields);
        FieldStack grad;
        for (int it = 0; it < cfg.iterations_per_level; ++it) {
            LossBreakdown bd = loss::composite_loss(frames, fields, level_cfg, guide_ptr, &grad, threads);
            lt.iterations.push_back(bd);
            if (it == 0) lt.initial_total = bd.total;
            // well-posed objectives stay O(10); treat runaway magnitudes as
            // divergence alongside genuine non-finite values
            if (!std::isfinite(bd.total) || std::abs(bd.total) > 1e15) {
                trace.diverged = true;
                fields = best_total < std::numeric_limits<double>::infinity() ? best : fields;
                lt.final_total = best_total;
                lt.wall_clock_sec =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                trace.levels.push_back(std::move(lt));
                return {DisplacementFieldSet(fields), std::move(trace)};
            }
            if (bd.total < best_total) {
                best_total = bd.total;
                best = fields;
            }
            adam.update(fields, grad, level_cfg);
        }
        if (cfg.iterations_per_level > 0) {
            LossBreakdown final_bd = loss::composite_loss(frames, fields, level_cfg, guide_ptr, nullptr, threads);
            if (final_bd.total < best_total) {
                best_total = final_bd.total;
                best = fields;
            }
            fields = std::move(best);
            lt.final_total = best_total;
        } else {
            LossBreakdown bd = loss::composite_loss(frames, fields, level_cfg, guide_ptr, nullptr, threads);
            lt.initial_total = lt.final_total = bd.total;
        }
        lt.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        trace.levels.push_back(std::move(lt));
    }

    for (int n = 0; n < t_count; ++n) {
        auto inv = warp::invert_field(fields[n], cfg.inversion_tol, cfg.inversion_max_iters);
        trace.final_inversion_residuals.push_back(inv.residual);
        if (!inv.converged) trace.inversions_converged = false;
    }
    return {DisplacementFieldSet(std::move(fields)), std::move(trace)};
}

/// Compares the analytic gradient of the composite loss against central
/// finite differences (h = 1e-3 px) and returns the max relative error,
/// |ga - gf| / max(|ga| + |gf|, 1e-4). The denominator floor covers the
/// h^2 truncation noise of the differences (~1e-8 absolute), which otherwise
/// dominates components where terms cancel to near zero. The optional
/// perturbation corrupts one analytic component first (test hook for the
/// harness itself).
inline double gradient_check(const ImageStack& frames, const FieldStack& fields,
                             const RegistrationConfig& cfg,
                             const loss::GuidanceData* guide = nullptr,
                             int perturb_component = -1, double perturb_delta = 0.0);

inline double gradient_check(const CineSequence& sequence, const DisplacementFieldSet& fields,
                             const RegistrationConfig& cfg,
                             const loss::GuidanceData* guide = nullptr) {
    return gradient_check(sequence.frames, fields.fields, cfg, guide);
}

inline double gradient_check(const ImageStack& frames, const FieldStack& fields,
                             const RegistrationConfig& cfg, const loss::GuidanceData* guide,
                             int perturb_component, double perturb_delta) {
    FieldStack grad;
    loss::composite_loss(frames, fields, cfg, guide, &grad);

    const double h = 1e-3;
    double max_rel = 0.0;
    int component = 0;
    FieldStack probe = fields;
    for (std::size_t n = 0; n < fields.size(); ++n)
        for (std::size_t i = 0; i < fields[n].size(); ++i)
            for (int axis = 0; axis < 2; ++axis, ++component) {
                double& slot = axis == 0 ? probe[n][i].x : probe[n][i].y;
                double saved = slot;
                slot = saved + h;
                double up = loss::composite_loss(frames, probe, cfg, guide).total;
                slot = saved - h;
                double down = loss::composite_loss(frames, probe, cfg, guide).total;
                slot = saved;
                double fd = (up - down) / (2.0 * h);
                double an = axis == 0 ? grad[n][i].x : grad[n][i].y;
                if (component == perturb_component) an += perturb_delta;
                double rel = std::abs(an - fd) / std::max(std::abs(an) + std::abs(fd), 1e-4);
                max_rel = std::max(max_rel, rel);
            }
    return max_rel;
}

}  // namespace cinegroup::gwreg
