#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/tensor_io.hpp"

namespace cinegroup {

inline constexpr int kNumStructures = 5;  // LV, LVM, RV, LA, RA; label 0 is background

inline const std::array<std::string, kNumStructures>& structure_names() {
    static const std::array<std::string, kNumStructures> names = {"LV", "LVM", "RV", "LA", "RA"};
    return names;
}

enum structure_label : std::uint8_t {
    kBackground = 0,
    kLV = 1,
    kLVM = 2,
    kRV = 3,
    kLA = 4,
    kRA = 5,
};

/// One cardiac cycle of 2D frames, intensities in [0, 1].
struct CineSequence {
    ImageStack frames;
    vec2 spacing{1.0, 1.0};  // (sx, sy) mm per pixel

    CineSequence() = default;
    CineSequence(ImageStack f, vec2 sp) : frames(std::move(f)), spacing(sp) { validate(); }

    int frame_count() const { return static_cast<int>(frames.size()); }
    int width() const { return frames.empty() ? 0 : frames.front().width(); }
    int height() const { return frames.empty() ? 0 : frames.front().height(); }

    void validate() const {
        if (frames.size() < 2) throw validation_error("CineSequence: needs at least 2 frames");
        if (!(spacing.x > 0.0) || !(spacing.y > 0.0))
            throw validation_error("CineSequence: spacing must be positive");
        int w = frames.front().width(), h = frames.front().height();
        if (w < 8 || h < 8) throw validation_error("CineSequence: frames must be at least 8x8");
        for (const auto& f : frames) {
            if (f.width() != w || f.height() != h)
                throw validation_error("CineSequence: inconsistent frame shapes");
            for (double v : f) {
                if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                    throw validation_error("CineSequence: intensity outside [0,1]");
            }
        }
    }
};

/// Per-frame label maps over the five cardiac structures plus background.
struct LabelMaskSet {
    LabelStack labels;

    LabelMaskSet() = default;
    explicit LabelMaskSet(LabelStack l) : labels(std::move(l)) { validate(); }

    int frame_count() const { return static_cast<int>(labels.size()); }
    int width() const { return labels.empty() ? 0 : labels.front().width(); }
    int height() const { return labels.empty() ? 0 : labels.front().height(); }

    void validate() const {
        if (labels.empty()) throw validation_error("LabelMaskSet: empty");
        int w = labels.front().width(), h = labels.front().height();
        for (const auto& m : labels) {
            if (m.width() != w || m.height() != h)
                throw validation_error("LabelMaskSet: inconsistent frame shapes");
            for (auto v : m)
                if (v > kNumStructures)
                    throw validation_error("LabelMaskSet: label value exceeds structure count");
        }
    }
};

/// Per-frame class probabilities, channel 0 is background.
struct ProbabilityMaskSet {
    // probs[n][k] is the H-by-W probability map for class k at frame n.
    std::vector<std::vector<Image>> probs;

    ProbabilityMaskSet() = default;
    explicit ProbabilityMaskSet(std::vector<std::vector<Image>> p) : probs(std::move(p)) { validate(); }

    int frame_count() const { return static_cast<int>(probs.size()); }

    void validate() const {
        if (probs.empty()) throw validation_error("ProbabilityMaskSet: empty");
        for (const auto& frame : probs) {
            if (frame.size() != kNumStructures + 1)
                throw validation_error("ProbabilityMaskSet: expected K+1 channels");
            const auto& c0 = frame.front();
            for (const auto& ch : frame)
                if (!ch.same_shape(c0))
                    throw validation_error("ProbabilityMaskSet: inconsistent channel shapes");
            for (std::size_t i = 0; i < c0.size(); ++i) {
                double s = 0.0;
                for (const auto& ch : frame) {
                    double v = ch[i];
                    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                        throw validation_error("ProbabilityMaskSet: probability outside [0,1]");
                    s += v;
                }
                if (std::abs(s - 1.0) > 1e-5)
                    throw validation_error("ProbabilityMaskSet: channel sum differs from 1");
            }
        }
    }
};

/// Per-frame displacement fields in pixel units; T_n(x) = x + field_n(x) maps
/// template coordinates to frame-n coordinates.
struct DisplacementFieldSet {
    FieldStack fields;

    DisplacementFieldSet() = default;
    explicit DisplacementFieldSet(FieldStack f) : fields(std::move(f)) { validate(); }

    int frame_count() const { return static_cast<int>(fields.size()); }
    int width() const { return fields.empty() ? 0 : fields.front().width(); }
    int height() const { return fields.empty() ? 0 : fields.front().height(); }

    void validate() const {
        if (fields.empty()) throw validation_error("DisplacementFieldSet: empty");
        int w = fields.front().width(), h = fields.front().height();
        for (const auto& f : fields) {
            if (f.width() != w || f.height() != h)
                throw validation_error("DisplacementFieldSet: inconsistent frame shapes");
            for (const auto& v : f)
                if (!std::isfinite(v.x) || !std::isfinite(v.y))
                    throw validation_error("DisplacementFieldSet: non-finite displacement");
        }
    }
};

/// Per-frame, per-structure distance-to-boundary maps, truncated and rescaled
/// to [0, 1]; exactly 0 on boundary pixels, constant 1 for absent structures.
struct DistanceMapSet {
    // maps[n][k - 1] is the map for structure label k at frame n.
    std::vector<std::vector<Image>> maps;

    DistanceMapSet() = default;
    explicit DistanceMapSet(std::vector<std::vector<Image>> m) : maps(std::move(m)) { validate(); }

    int frame_count() const { return static_cast<int>(maps.size()); }

    void validate() const {
        if (maps.empty()) throw validation_error("DistanceMapSet: empty");
        for (const auto& frame : maps) {
            if (frame.size() != kNumStructures)
                throw validation_error("DistanceMapSet: expected K structure maps per frame");
            for (const auto& m : frame)
                for (double v : m)
                    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                        throw validation_error("DistanceMapSet: value outside [0,1]");
        }
    }
};

/// Four valve-hinge landmarks per frame: mitral pair then tricuspid pair.
struct LandmarkSet {
    // points[n] holds 4 (x, y) pixel coordinates.
    std::vector<std::array<vec2, 4>> points;

    LandmarkSet() = default;
    LandmarkSet(std::vector<std::array<vec2, 4>> p, int width, int height) : points(std::move(p)) {
        validate(width, height);
    }

    int frame_count() const { return static_cast<int>(points.size()); }

    void validate(int width, int height) const {
        if (points.empty()) throw validation_error("LandmarkSet: empty");
        for (const auto& frame : points)
            for (const auto& p : frame)
                if (!(p.x >= 0.0) || !(p.y >= 0.0) || !(p.x <= width - 1.0) || !(p.y <= height - 1.0))
                    throw validation_error("LandmarkSet: landmark outside image bounds");
    }
};

enum class TemplateMode { average, pca };

/// All solver and loss settings. Defaults follow the reference operating
/// point: lambda0=0.8, lambda1=0.01, w0=5.0, w1=w2=1.0, learning rate 1e-4.
struct RegistrationConfig {
    double lambda0 = 0.8;    // smoothness weight
    double lambda1 = 0.01;   // cyclic weight
    double w0 = 5.0;         // distance-map similarity weight
    double w1 = 1.0;         // propagated-segmentation loss weight
    double w2 = 1.0;         // segmenter loss weight (no segmenter in this artifact; term is 0)
    int lncc_window = 9;
    int pyramid_levels = 3;
    int iterations_per_level = 200;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    TemplateMode template_mode = TemplateMode::average;
    double inversion_tol = 0.01;  // px; 0 disables early stopping
    int inversion_max_iters = 100;
    double charbonnier_eps = 1e-6;

    void validate() const {
        if (lambda0 < 0 || lambda1 < 0 || w0 < 0 || w1 < 0 || w2 < 0)
            throw validation_error("RegistrationConfig: weights must be >= 0");
        if (lncc_window < 3 || lncc_window % 2 == 0)
            throw validation_error("RegistrationConfig: lncc_window must be odd and >= 3");
        if (pyramid_levels < 1) throw validation_error("RegistrationConfig: pyramid_levels must be >= 1");
        if (iterations_per_level < 0)
            throw validation_error("RegistrationConfig: iterations_per_level must be >= 0");
        if (!(learning_rate > 0)) throw validation_error("RegistrationConfig: learning_rate must be > 0");
        if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1)
            throw validation_error("RegistrationConfig: Adam betas must lie in [0,1)");
        if (!(adam_eps > 0)) throw validation_error("RegistrationConfig: adam_eps must be > 0");
        if (inversion_tol < 0) throw validation_error("RegistrationConfig: inversion_tol must be >= 0");
        if (inversion_max_iters < 1)
            throw validation_error("RegistrationConfig: inversion_max_iters must be >= 1");
        if (!(charbonnier_eps > 0))
            throw validation_error("RegistrationConfig: charbonnier_eps must be > 0");
    }
};

// ---------------------------------------------------------------------------
// Conversions between domain types and raw container tensors.

inline RawTensor to_tensor(const ImageStack& frames) {
    if (frames.empty()) throw validation_error("to_tensor: empty image stack");
    int w = frames.front().width(), h = frames.front().height();
    std::vector<float> data;
    data.reserve(frames.size() * frames.front().size());
    for (const auto& f : frames) {
        if (f.width() != w || f.height() != h)
            throw validation_error("to_tensor: inconsistent frame shapes");
        for (double v : f) data.push_back(static_cast<float>(v));
    }
    return RawTensor::of_f32({static_cast<std::int64_t>(frames.size()), h, w}, std::move(data));
}

inline ImageStack image_stack_from_tensor(const RawTensor& t) {
    if (t.type != dtype::f32)
        throw container_error(container_error::code::dtype_mismatch,
                              "image stack requires an f32 tensor");
    if (t.shape.size() != 3)
        throw container_error(container_error::code::shape_mismatch,
                              "image stack requires a TxHxW tensor");
    int frames = static_cast<int>(t.shape[0]);
    int h = static_cast<int>(t.shape[1]), w = static_cast<int>(t.shape[2]);
    ImageStack out;
    out.reserve(frames);
    std::size_t i = 0;
    for (int n = 0; n < frames; ++n) {
        Image img(w, h);
        for (auto& v : img) v = t.f32[i++];
        out.push_back(std::move(img));
    }
    return out;
}

inline RawTensor to_tensor(const DisplacementFieldSet& fs) {
    int w = fs.width(), h = fs.height();
    std::vector<float> data;
    data.reserve(fs.fields.size() * static_cast<std::size_t>(w) * h * 2);
    for (const auto& f : fs.fields)
        for (const auto& v : f) {
            data.push_back(static_cast<float>(v.x));
            data.push_back(static_cast<float>(v.y));
        }
    return RawTensor::of_f32({fs.frame_count(), h, w, 2}, std::move(data));
}

inline DisplacementFieldSet fields_from_tensor(const RawTensor& t) {
    if (t.type != dtype::f32)
        throw container_error(container_error::code::dtype_mismatch,
                              "displacement fields require an f32 tensor");
    if (t.shape.size() != 4 || t.shape[3] != 2)
        throw container_error(container_error::code::shape_mismatch,
                              "displacement fields require a TxHxWx2 tensor");
    int frames = static_cast<int>(t.shape[0]);
    int h = static_cast<int>(t.shape[1]), w = static_cast<int>(t.shape[2]);
    FieldStack fields;
    fields.reserve(frames);
    std::size_t i = 0;
    for (int n = 0; n < frames; ++n) {
        Field f(w, h);
        for (auto& v : f) {
            v.x = t.f32[i++];
            v.y = t.f32[i++];
        }
        fields.push_back(std::move(f));
    }
    return DisplacementFieldSet(std::move(fields));
}

inline RawTensor to_tensor(const LabelMaskSet& ms) {
    int w = ms.width(), h = ms.height();
    std::vector<std::uint8_t> data;
    data.reserve(ms.labels.size() * static_cast<std::size_t>(w) * h);
    for (const auto& m : ms.labels) data.insert(data.end(), m.begin(), m.end());
    return RawTensor::of_u8({ms.frame_count(), h, w}, std::move(data));
}

inline LabelMaskSet masks_from_tensor(const RawTensor& t) {
    if (t.type != dtype::u8)
        throw container_error(container_error::code::dtype_mismatch,
                              "label masks require a u8 tensor");
    if (t.shape.size() != 3)
        throw container_error(container_error::code::shape_mismatch,
                              "label masks require a TxHxW tensor");
    int frames = static_cast<int>(t.shape[0]);
    int h = static_cast<int>(t.shape[1]), w = static_cast<int>(t.shape[2]);
    LabelStack labels;
    labels.reserve(frames);
    std::size_t i = 0;
    for (int n = 0; n < frames; ++n) {
        LabelImage m(w, h);
        for (auto& v : m) v = t.u8[i++];
        labels.push_back(std::move(m));
    }
    return LabelMaskSet(std::move(labels));  // validates label range
}

/// Linear rescale of a raw stack so the global minimum maps to 0 and the
/// global maximum to 1.
inline ImageStack normalize_sequence(const ImageStack& raw) {
    if (raw.empty()) throw validation_error("normalize_sequence: empty stack");
    double lo = raw.front()[0], hi = raw.front()[0];
    for (const auto& f : raw)
        for (double v : f) {
            if (!std::isfinite(v)) throw validation_error("normalize_sequence: non-finite input");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) throw validation_error("normalize_sequence: constant stack (max == min)");
    double scale = 1.0 / (hi - lo);
    ImageStack out = raw;
    for (auto& f : out)
        for (auto& v : f) v = (v - lo) * scale;
    return out;
}

}  // namespace cinegroup
