#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace cinegroup {

struct vec2 {
    double x = 0.0;
    double y = 0.0;

    vec2() = default;
    vec2(double px, double py) : x(px), y(py) {}

    vec2& operator+=(const vec2& o) { x += o.x; y += o.y; return *this; }
    vec2& operator-=(const vec2& o) { x -= o.x; y -= o.y; return *this; }
    vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

inline vec2 operator+(vec2 a, const vec2& b) { return a += b; }
inline vec2 operator-(vec2 a, const vec2& b) { return a -= b; }
inline vec2 operator*(vec2 a, double s) { return a *= s; }
inline vec2 operator*(double s, vec2 a) { return a *= s; }
inline bool operator==(const vec2& a, const vec2& b) { return a.x == b.x && a.y == b.y; }
inline double norm(const vec2& v) { return std::sqrt(v.x * v.x + v.y * v.y); }
inline double norm_sq(const vec2& v) { return v.x * v.x + v.y * v.y; }

/// Dense H-by-W raster stored row-major; (x, y) indexing with x along the width.
template <typename T>
class grid {
public:
    grid() = default;
    grid(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    const T& operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename U>
    bool same_shape(const grid<U>& o) const { return width_ == o.width() && height_ == o.height(); }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using Image = grid<double>;
using LabelImage = grid<std::uint8_t>;
using Field = grid<vec2>;

using ImageStack = std::vector<Image>;
using FieldStack = std::vector<Field>;
using LabelStack = std::vector<LabelImage>;

inline Field zero_field(int width, int height) { return Field(width, height, vec2{0.0, 0.0}); }

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Chunking is by
/// index range, so results written to per-index slots are identical for any
/// thread count; reductions must be done by the caller in index order.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::size_t chunk = (count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min<std::size_t>(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(static_cast<int>(i));
        });
    }
    for (auto& th : pool) th.join();
}

/// Deterministic 64-bit FNV-1a, used for input fingerprints in run manifests.
inline std::uint64_t fnv1a64(const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace cinegroup
