#pragma once

#include <cmath>

#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/loss/boxsum.hpp"

namespace cinegroup::loss {

// Mean over pixels of the windowed normalized cross-correlation. Local
// means/variances come from replicate-border window sums; windows whose
// variance (of either image) falls below the guard contribute 0.

inline constexpr double kVarianceGuard = 1e-5;

namespace detail {

inline void check_lncc_args(const Image& a, const Image& b, int window) {
    if (!a.same_shape(b)) throw validation_error("lncc: shape mismatch");
    if (window % 2 == 0) throw validation_error("lncc: window must be odd");
    if (window < 3 || window > std::min(a.width(), a.height()))
        throw validation_error("lncc: window must be in [3, min(H, W)]");
}

}  // namespace detail

inline double lncc(const Image& a, const Image& b, int window) {
    detail::check_lncc_args(a, b, window);
    int radius = window / 2;
    double n = static_cast<double>(window) * window;
    Image a2(a.width(), a.height()), b2(a.width(), a.height()), ab(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a2[i] = a[i] * a[i];
        b2[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    Image sa = box_sum(a, radius), sb = box_sum(b, radius);
    Image saa = box_sum(a2, radius), sbb = box_sum(b2, radius), sab = box_sum(ab, radius);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double mu_a = sa[i] / n, mu_b = sb[i] / n;
        double va = saa[i] / n - mu_a * mu_a;
        double vb = sbb[i] / n - mu_b * mu_b;
        if (va < kVarianceGuard || vb < kVarianceGuard) continue;
        double cov = sab[i] / n - mu_a * mu_b;
        acc += cov / std::sqrt(va * vb);
    }
    return acc / static_cast<double>(a.size());
}

/// Value of lncc(a, b, window) plus its gradient: accumulates
/// coef * d(lncc)/da into grad_a and coef * d(lncc)/db into grad_b
/// (either may be null). Exact transpose of the forward computation,
/// including the replicate borders and the variance guard.
inline double lncc_grad(const Image& a, const Image& b, int window, double coef,
                        Image* grad_a, Image* grad_b) {
    detail::check_lncc_args(a, b, window);
    int radius = window / 2;
    int w = a.width(), h = a.height();
    double n = static_cast<double>(window) * window;
    double inv_count = 1.0 / static_cast<double>(a.size());

    Image a2(w, h), b2(w, h), ab(w, h);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a2[i] = a[i] * a[i];
        b2[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    Image sa = box_sum(a, radius), sb = box_sum(b, radius);
    Image saa = box_sum(a2, radius), sbb = box_sum(b2, radius), sab = box_sum(ab, radius);

    // per-window coefficients for each of the five local sums
    Image c_sa(w, h, 0.0), c_sb(w, h, 0.0), c_saa(w, h, 0.0), c_sbb(w, h, 0.0), c_sab(w, h, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double mu_a = sa[i] / n, mu_b = sb[i] / n;
        double va = saa[i] / n - mu_a * mu_a;
        double vb = sbb[i] / n - mu_b * mu_b;
        if (va < kVarianceGuard || vb < kVarianceGuard) continue;
        double ivv = 1.0 / std::sqrt(va * vb);
        double cov = sab[i] / n - mu_a * mu_b;
        double cc = cov * ivv;
        acc += cc;
        double scale = coef * inv_count / n;
        c_sab[i] = scale * ivv;
        c_saa[i] = scale * (-cc / (2.0 * va));
        c_sbb[i] = scale * (-cc / (2.0 * vb));
        c_sa[i] = scale * (-mu_b * ivv + cc * mu_a / va);
        c_sb[i] = scale * (-mu_a * ivv + cc * mu_b / vb);
    }

    if (grad_a) {
        Image ta = box_sum_adjoint(c_sa, radius);
        Image taa = box_sum_adjoint(c_saa, radius);
        Image tab = box_sum_adjoint(c_sab, radius);
        for (std::size_t i = 0; i < a.size(); ++i)
            (*grad_a)[i] += ta[i] + 2.0 * a[i] * taa[i] + b[i] * tab[i];
    }
    if (grad_b) {
        Image tb = box_sum_adjoint(c_sb, radius);
        Image tbb = box_sum_adjoint(c_sbb, radius);
        Image tab = box_sum_adjoint(c_sab, radius);
        for (std::size_t i = 0; i < a.size(); ++i)
            (*grad_b)[i] += tb[i] + 2.0 * b[i] * tbb[i] + a[i] * tab[i];
    }
    return acc * inv_count;
}

}  // namespace cinegroup::loss
