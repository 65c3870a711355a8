#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cinegroup/common.hpp"
#include "cinegroup/core/types.hpp"

namespace cinegroup::anatomy {

inline constexpr double kDistanceTruncation = 20.0;  // px

namespace detail {

// 1D squared-distance transform (Felzenszwalb & Huttenlocher); exact for
// point seed sets.
inline void edt_1d(const double* f, double* d, int n, int stride) {
    thread_local std::vector<int> v;
    thread_local std::vector<double> z;
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    auto fv = [&](int i) { return f[i * stride]; };
    for (int q = 1; q < n; ++q) {
        double s = ((fv(q) + q * q) - (fv(v[k]) + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((fv(q) + q * q) - (fv(v[k]) + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q * stride] = dq * dq + fv(v[k]);
    }
}

inline Image squared_edt(const grid<std::uint8_t>& seeds) {
    int w = seeds.width(), h = seeds.height();
    constexpr double kFar = 1e18;
    Image d(w, h);
    for (std::size_t i = 0; i < seeds.size(); ++i) d[i] = seeds[i] ? 0.0 : kFar;
    Image tmp(w, h);
    for (int x = 0; x < w; ++x) detail::edt_1d(d.data() + x, tmp.data() + x, h, w);
    for (int y = 0; y < h; ++y)
        detail::edt_1d(tmp.data() + static_cast<std::size_t>(y) * w,
                       d.data() + static_cast<std::size_t>(y) * w, w, 1);
    return d;
}

}  // namespace detail

/// Boundary pixels of structure k: foreground pixels of k with a 4-adjacent
/// pixel of a different label.
inline grid<std::uint8_t> boundary_pixels(const LabelImage& mask, int label) {
    int w = mask.width(), h = mask.height();
    grid<std::uint8_t> b(w, h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (mask(x, y) != label) continue;
            bool edge = (x > 0 && mask(x - 1, y) != label) || (x + 1 < w && mask(x + 1, y) != label) ||
                        (y > 0 && mask(x, y - 1) != label) || (y + 1 < h && mask(x, y + 1) != label);
            if (edge) b(x, y) = 1;
        }
    return b;
}

/// Exact unsigned Euclidean distance to each structure's boundary pixel set,
/// truncated at 20 px and rescaled to [0, 1]. Structures absent from a frame
/// give the constant map 1.
inline Image distance_map(const LabelImage& mask, int label) {
    auto seeds = boundary_pixels(mask, label);
    bool any = false;
    for (auto v : seeds)
        if (v) {
            any = true;
            break;
        }
    if (!any) return Image(mask.width(), mask.height(), 1.0);
    Image sq = detail::squared_edt(seeds);
    for (auto& v : sq) v = std::min(std::sqrt(v), kDistanceTruncation) / kDistanceTruncation;
    return sq;
}

inline DistanceMapSet distance_transform(const LabelMaskSet& masks, int threads = 1) {
    std::vector<std::vector<Image>> out(masks.frame_count());
    parallel_for(masks.frame_count(), threads, [&](int n) {
        out[n].reserve(kNumStructures);
        for (int k = 1; k <= kNumStructures; ++k) out[n].push_back(distance_map(masks.labels[n], k));
    });
    return DistanceMapSet(std::move(out));
}

/// Raw-stack variant used inside the solver, where intermediate pyramid
/// levels bypass the domain-type validation.
inline std::vector<std::vector<Image>> distance_transform(const LabelStack& masks, int threads = 1) {
    std::vector<std::vector<Image>> out(masks.size());
    parallel_for(static_cast<int>(masks.size()), threads, [&](int n) {
        out[n].reserve(kNumStructures);
        for (int k = 1; k <= kNumStructures; ++k) out[n].push_back(distance_map(masks[n], k));
    });
    return out;
}

}  // namespace cinegroup::anatomy
