#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cinegroup/anatomy/contour.hpp"
#include "cinegroup/common.hpp"
#include "cinegroup/core/errors.hpp"
#include "cinegroup/core/types.hpp"
#include "cinegroup/version.hpp"

namespace cinegroup::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// RegistrationConfig <-> JSON. Missing keys keep their defaults, so partial
// config files work as overrides.

inline json config_to_json(const RegistrationConfig& c) {
    return json{{"lambda0", c.lambda0},
                {"lambda1", c.lambda1},
                {"w0", c.w0},
                {"w1", c.w1},
                {"w2", c.w2},
                {"lncc_window", c.lncc_window},
                {"pyramid_levels", c.pyramid_levels},
                {"iterations_per_level", c.iterations_per_level},
                {"learning_rate", c.learning_rate},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"template_mode", c.template_mode == TemplateMode::pca ? "pca" : "average"},
                {"inversion_tol", c.inversion_tol},
                {"inversion_max_iters", c.inversion_max_iters},
                {"charbonnier_eps", c.charbonnier_eps}};
}

inline RegistrationConfig config_from_json(const json& j, RegistrationConfig base = {}) {
    auto num = [&](const char* key, double& slot) {
        if (j.contains(key)) slot = j.at(key).get<double>();
    };
    auto integer = [&](const char* key, int& slot) {
        if (j.contains(key)) slot = j.at(key).get<int>();
    };
    num("lambda0", base.lambda0);
    num("lambda1", base.lambda1);
    num("w0", base.w0);
    num("w1", base.w1);
    num("w2", base.w2);
    integer("lncc_window", base.lncc_window);
    integer("pyramid_levels", base.pyramid_levels);
    integer("iterations_per_level", base.iterations_per_level);
    num("learning_rate", base.learning_rate);
    num("adam_beta1", base.adam_beta1);
    num("adam_beta2", base.adam_beta2);
    num("adam_eps", base.adam_eps);
    num("inversion_tol", base.inversion_tol);
    integer("inversion_max_iters", base.inversion_max_iters);
    num("charbonnier_eps", base.charbonnier_eps);
    if (j.contains("template_mode")) {
        std::string mode = j.at("template_mode").get<std::string>();
        if (mode == "pca")
            base.template_mode = TemplateMode::pca;
        else if (mode == "average")
            base.template_mode = TemplateMode::average;
        else
            throw validation_error("config: unknown template_mode '" + mode + "'");
    }
    base.validate();
    return base;
}

inline RegistrationConfig load_config(const std::filesystem::path& path, RegistrationConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw io_error("load_config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw validation_error("load_config: invalid JSON: " + std::string(e.what()));
    }
    return config_from_json(j, base);
}

// ---------------------------------------------------------------------------
// Frame-indexed anatomy file:
// {"frames":[{"index":n,"structures":{"LV":[[x,y],...]},"landmarks":[[x,y]x4]}]}

inline json landmarks_to_json(const LandmarkSet& landmarks) {
    json frames = json::array();
    for (int n = 0; n < landmarks.frame_count(); ++n) {
        json pts = json::array();
        for (const auto& p : landmarks.points[n]) pts.push_back({p.x, p.y});
        frames.push_back({{"index", n}, {"landmarks", pts}});
    }
    return json{{"frames", frames}};
}

inline LandmarkSet landmarks_from_json(const json& j, int width, int height) {
    if (!j.contains("frames")) throw validation_error("landmarks: missing 'frames'");
    std::map<int, std::array<vec2, 4>> by_index;
    for (const auto& f : j.at("frames")) {
        if (!f.contains("landmarks")) continue;
        const auto& pts = f.at("landmarks");
        if (pts.size() != 4) throw validation_error("landmarks: expected 4 points per frame");
        std::array<vec2, 4> arr;
        for (int l = 0; l < 4; ++l)
            arr[l] = vec2{pts[l][0].get<double>(), pts[l][1].get<double>()};
        by_index[f.at("index").get<int>()] = arr;
    }
    if (by_index.empty()) throw validation_error("landmarks: no frames with landmarks");
    std::vector<std::array<vec2, 4>> points;
    int expect = 0;
    for (const auto& [idx, arr] : by_index) {
        if (idx != expect++) throw validation_error("landmarks: frame indices must be 0..T-1");
        points.push_back(arr);
    }
    return LandmarkSet(std::move(points), width, height);
}

inline LandmarkSet load_landmarks(const std::filesystem::path& path, int width, int height) {
    std::ifstream in(path);
    if (!in) throw io_error("load_landmarks: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw validation_error("load_landmarks: invalid JSON: " + std::string(e.what()));
    }
    return landmarks_from_json(j, width, height);
}

inline json contours_to_json(const std::vector<std::vector<anatomy::Contour>>& per_frame,
                             const LandmarkSet* landmarks = nullptr) {
    json frames = json::array();
    for (std::size_t n = 0; n < per_frame.size(); ++n) {
        json structures = json::object();
        for (const auto& c : per_frame[n]) {
            json pts = json::array();
            for (const auto& p : c.points) pts.push_back({p.x, p.y});
            structures[structure_names()[c.label - 1]] = pts;
        }
        json frame{{"index", static_cast<int>(n)}, {"structures", structures}};
        if (landmarks && static_cast<int>(n) < landmarks->frame_count()) {
            json pts = json::array();
            for (const auto& p : landmarks->points[n]) pts.push_back({p.x, p.y});
            frame["landmarks"] = pts;
        }
        frames.push_back(frame);
    }
    return json{{"frames", frames}};
}

// ---------------------------------------------------------------------------
// Run manifest: one per CLI invocation. Everything except the "timestamp"
// object is a pure function of the inputs, so repeated runs differ only
// there.

struct ManifestBuilder {
    std::string command;
    json config = json::object();
    std::map<std::string, std::string> input_hashes;
    std::vector<std::string> outputs;
    double wall_clock_sec = 0.0;

    void add_input(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw io_error("manifest: cannot hash " + path.string());
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
        input_hashes[path.string()] = buf;
    }

    void write(const std::filesystem::path& path, long long started_unix) const {
        json j{{"command", command},
               {"config", config},
               {"inputs", input_hashes},
               {"outputs", outputs},
               {"version", kVersion},
               {"timestamp", {{"started_unix", started_unix}, {"wall_clock_sec", wall_clock_sec}}}};
        std::ofstream out(path);
        if (!out) throw io_error("manifest: cannot write " + path.string());
        out << j.dump(2) << "\n";
    }
};

}  // namespace cinegroup::io
