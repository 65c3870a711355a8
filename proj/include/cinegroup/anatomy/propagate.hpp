#pragma once

#include <vector>

#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"
#include "cinegroup/warp/warp.hpp"

namespace cinegroup::anatomy {

/// Propagates one frame's mask to every frame of the sequence through the
/// relative transforms T_source o T_n^{-1}; the source frame passes through
/// unchanged.
inline LabelMaskSet propagate_masks(const LabelImage& source, int source_frame,
                                    const DisplacementFieldSet& fields,
                                    double inversion_tol = 0.01, int inversion_max_iters = 100,
                                    int threads = 1) {
    if (source_frame < 0 || source_frame >= fields.frame_count())
        throw validation_error("propagate_masks: source frame out of range");
    if (source.width() != fields.width() || source.height() != fields.height())
        throw validation_error("propagate_masks: mask/field shape mismatch");
    int t_count = fields.frame_count();
    LabelStack out(t_count);
    parallel_for(t_count, threads, [&](int n) {
        if (n == source_frame) {
            out[n] = source;
            return;
        }
        auto inv = warp::invert_field(fields.fields[n], inversion_tol, inversion_max_iters);
        Field rel = warp::compose(fields.fields[source_frame], inv.field);
        out[n] = warp::warp_mask(source, rel);
    });
    return LabelMaskSet(std::move(out));
}

/// Dictionary of propagated masks: entry (r, n) is frame r's mask carried to
/// frame n; the diagonal holds the sources themselves.
struct MaskDictionary {
    std::vector<LabelStack> entries;  // entries[r][n]

    int frame_count() const { return static_cast<int>(entries.size()); }
};

inline MaskDictionary build_dictionary(const LabelMaskSet& masks, const DisplacementFieldSet& fields,
                                       double inversion_tol = 0.01, int inversion_max_iters = 100,
                                       int threads = 1) {
    if (masks.frame_count() != fields.frame_count())
        throw validation_error("build_dictionary: mask/field frame count mismatch");
    int t_count = fields.frame_count();

    // each frame's inverse is shared by a whole dictionary column
    FieldStack inverses(t_count);
    parallel_for(t_count, threads, [&](int n) {
        inverses[n] = warp::invert_field(fields.fields[n], inversion_tol, inversion_max_iters).field;
    });

    MaskDictionary dict;
    dict.entries.assign(t_count, LabelStack(t_count));
    parallel_for(t_count * t_count, threads, [&](int idx) {
        int r = idx / t_count, n = idx % t_count;
        if (r == n) {
            dict.entries[r][n] = masks.labels[r];
            return;
        }
        Field rel = warp::compose(fields.fields[r], inverses[n]);
        dict.entries[r][n] = warp::warp_mask(masks.labels[r], rel);
    });
    return dict;
}

/// Per-pixel majority over all propagated candidates for each frame; ties go
/// to the smaller label index.
inline LabelMaskSet majority_vote(const MaskDictionary& dict) {
    if (dict.entries.empty()) throw validation_error("majority_vote: empty dictionary");
    int t_count = dict.frame_count();
    int w = dict.entries.front().front().width(), h = dict.entries.front().front().height();
    LabelStack out(t_count, LabelImage(w, h, 0));
    for (int n = 0; n < t_count; ++n)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int counts[kNumStructures + 1] = {};
                for (int r = 0; r < t_count; ++r) ++counts[dict.entries[r][n](x, y)];
                int best = 0;
                for (int k = 1; k <= kNumStructures; ++k)
                    if (counts[k] > counts[best]) best = k;
                out[n](x, y) = static_cast<std::uint8_t>(best);
            }
    return LabelMaskSet(std::move(out));
}

}  // namespace cinegroup::anatomy
