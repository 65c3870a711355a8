#pragma once

#include <algorithm>
#include <vector>

#include "cinegroup/common.hpp"
#include "cinegroup/core/types.hpp"
#include "cinegroup/warp/warp.hpp"

namespace cinegroup::gwreg {

namespace detail {

template <typename T>
inline grid<T> pad_to_even(const grid<T>& src) {
    int w = src.width() + (src.width() % 2), h = src.height() + (src.height() % 2);
    if (w == src.width() && h == src.height()) return src;
    grid<T> out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out(x, y) = src(std::min(x, src.width() - 1), std::min(y, src.height() - 1));
    return out;
}

}  // namespace detail

/// 2x2 box-average downsampling; odd dimensions are replicate-padded by one
/// row/column first.
inline Image downsample_image(const Image& image) {
    Image src = detail::pad_to_even(image);
    Image out(src.width() / 2, src.height() / 2);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            out(x, y) = 0.25 * (src(2 * x, 2 * y) + src(2 * x + 1, 2 * y) + src(2 * x, 2 * y + 1) +
                                src(2 * x + 1, 2 * y + 1));
    return out;
}

/// Label downsampling: 2x2 one-hot averaging followed by argmax, ties to the
/// smaller label.
inline LabelImage downsample_mask(const LabelImage& mask) {
    LabelImage src = detail::pad_to_even(mask);
    LabelImage out(src.width() / 2, src.height() / 2);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            int counts[kNumStructures + 1] = {};
            ++counts[src(2 * x, 2 * y)];
            ++counts[src(2 * x + 1, 2 * y)];
            ++counts[src(2 * x, 2 * y + 1)];
            ++counts[src(2 * x + 1, 2 * y + 1)];
            int best = 0;
            for (int k = 1; k <= kNumStructures; ++k)
                if (counts[k] > counts[best]) best = k;
            out(x, y) = static_cast<std::uint8_t>(best);
        }
    return out;
}

/// Bilinear field upsampling to an explicit target shape, displacement
/// magnitudes doubled to match the finer pixel grid.
inline Field upsample_field(const Field& field, int target_width, int target_height) {
    Field out(target_width, target_height);
    for (int y = 0; y < target_height; ++y)
        for (int x = 0; x < target_width; ++x) {
            vec2 v = warp::sample(field, (x - 0.5) / 2.0, (y - 0.5) / 2.0);
            out(x, y) = 2.0 * v;
        }
    return out;
}

inline Field upsample_field(const Field& field) {
    return upsample_field(field, field.width() * 2, field.height() * 2);
}

}  // namespace cinegroup::gwreg
