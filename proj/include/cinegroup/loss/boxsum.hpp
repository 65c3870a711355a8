#pragma once

#include <algorithm>
#include <vector>

#include "cinegroup/common.hpp"

namespace cinegroup::loss {

// Local window sums with replicate-edge borders:
//   box_sum(f)(p) = sum over offsets |o| <= radius of f(clamp(p + o)).
// box_sum_adjoint is the exact transpose of that operator, used to push
// per-window loss coefficients back onto pixels. The pair satisfies
// <box_sum(f), g> == <f, box_sum_adjoint(g)> for all f, g.

namespace detail {

inline void box1d(const double* src, double* dst, int n, int stride, int radius) {
    // prefix sums plus replicate-edge corrections
    thread_local std::vector<double> prefix;
    prefix.resize(n + 1);
    prefix[0] = 0.0;
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + src[i * stride];
    double first = src[0], last = src[(n - 1) * stride];
    for (int i = 0; i < n; ++i) {
        int lo = std::max(i - radius, 0);
        int hi = std::min(i + radius, n - 1);
        double s = prefix[hi + 1] - prefix[lo];
        if (i - radius < 0) s += (radius - i) * first;
        if (i + radius > n - 1) s += (i + radius - (n - 1)) * last;
        dst[i * stride] = s;
    }
}

inline void box1d_adjoint(const double* g, double* dst, int n, int stride, int radius) {
    for (int i = 0; i < n; ++i) dst[i * stride] = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = g[i * stride];
        for (int t = i - radius; t <= i + radius; ++t)
            dst[std::clamp(t, 0, n - 1) * stride] += v;
    }
}

}  // namespace detail

inline Image box_sum(const Image& src, int radius) {
    int w = src.width(), h = src.height();
    Image tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y) detail::box1d(src.data() + static_cast<std::size_t>(y) * w, tmp.data() + static_cast<std::size_t>(y) * w, w, 1, radius);
    for (int x = 0; x < w; ++x) detail::box1d(tmp.data() + x, out.data() + x, h, w, radius);
    return out;
}

inline Image box_sum_adjoint(const Image& g, int radius) {
    int w = g.width(), h = g.height();
    Image tmp(w, h), out(w, h);
    // forward is rows-then-columns, so the transpose is columns-then-rows
    for (int x = 0; x < w; ++x) detail::box1d_adjoint(g.data() + x, tmp.data() + x, h, w, radius);
    for (int y = 0; y < h; ++y) detail::box1d_adjoint(tmp.data() + static_cast<std::size_t>(y) * w, out.data() + static_cast<std::size_t>(y) * w, w, 1, radius);
    return out;
}

}  // namespace cinegroup::loss
