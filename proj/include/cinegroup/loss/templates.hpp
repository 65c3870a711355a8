#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"

namespace cinegroup::loss {

/// Implicit reference image built from the warped frames. `weights` holds the
/// per-frame combination weights (uniform 1/T in average mode).
struct TemplateImage {
    Image pixels;
    std::vector<double> weights;
};

inline TemplateImage average_template(const ImageStack& warped) {
    if (warped.size() < 2) throw validation_error("average_template: needs at least 2 frames");
    int w = warped.front().width(), h = warped.front().height();
    TemplateImage t;
    t.pixels = Image(w, h, 0.0);
    double inv = 1.0 / static_cast<double>(warped.size());
    for (const auto& f : warped)
        for (std::size_t i = 0; i < f.size(); ++i) t.pixels[i] += f[i];
    for (auto& v : t.pixels) v *= inv;
    t.weights.assign(warped.size(), inv);
    return t;
}

/// PCA template: the frames-as-variables covariance (each frame centered by
/// its spatial mean) is reduced by power iteration; the leading eigenvector,
/// rescaled to sum 1, weights the warped frames. Degenerate spectra (leading
/// eigenvalue < 1e-12) and near-zero weight sums fall back to the average.
inline TemplateImage pca_template(const ImageStack& warped) {
    if (warped.size() < 2) throw validation_error("pca_template: needs at least 2 frames");
    int t_count = static_cast<int>(warped.size());
    std::size_t pixels = warped.front().size();

    std::vector<double> means(t_count, 0.0);
    for (int m = 0; m < t_count; ++m) {
        double s = 0.0;
        for (double v : warped[m]) s += v;
        means[m] = s / static_cast<double>(pixels);
    }
    std::vector<double> cov(static_cast<std::size_t>(t_count) * t_count, 0.0);
    for (int m = 0; m < t_count; ++m)
        for (int n = m; n < t_count; ++n) {
            double s = 0.0;
            for (std::size_t i = 0; i < pixels; ++i)
                s += (warped[m][i] - means[m]) * (warped[n][i] - means[n]);
            s /= static_cast<double>(pixels);
            cov[m * t_count + n] = s;
            cov[n * t_count + m] = s;
        }

    std::vector<double> v(t_count, 1.0 / std::sqrt(static_cast<double>(t_count)));
    std::vector<double> next(t_count, 0.0);
    double eigenvalue = 0.0;
    bool converged = false;
    for (int it = 0; it < 1000; ++it) {
        for (int m = 0; m < t_count; ++m) {
            double s = 0.0;
            for (int n = 0; n < t_count; ++n) s += cov[m * t_count + n] * v[n];
            next[m] = s;
        }
        double norm = std::sqrt(std::inner_product(next.begin(), next.end(), next.begin(), 0.0));
        if (norm < 1e-300) break;  // zero matrix
        double delta = 0.0;
        for (int m = 0; m < t_count; ++m) {
            next[m] /= norm;
            delta = std::max(delta, std::abs(next[m] - v[m]));
            // sign flips count as movement; handled by comparing against -v too
        }
        double delta_neg = 0.0;
        for (int m = 0; m < t_count; ++m) delta_neg = std::max(delta_neg, std::abs(next[m] + v[m]));
        v = next;
        eigenvalue = norm;
        if (std::min(delta, delta_neg) < 1e-10) {
            converged = true;
            break;
        }
    }

    double wsum = std::accumulate(v.begin(), v.end(), 0.0);
    if (!converged || eigenvalue < 1e-12 || std::abs(wsum) < 1e-8)
        return average_template(warped);

    if (wsum < 0.0)
        for (auto& x : v) x = -x;
    wsum = std::abs(wsum);
    for (auto& x : v) x /= wsum;

    TemplateImage t;
    t.pixels = Image(warped.front().width(), warped.front().height(), 0.0);
    for (int m = 0; m < t_count; ++m)
        for (std::size_t i = 0; i < pixels; ++i) t.pixels[i] += v[m] * warped[m][i];
    t.weights = std::move(v);
    return t;
}

}  // namespace cinegroup::loss
