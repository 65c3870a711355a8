// cinegroup: groupwise cine registration and cardiac-function quantification.
//
// Subcommands: phantom, register, invert, propagate, vote, strain, volume,
// metrics. Every run writes its outputs plus one manifest.json into --out-dir.
// Exit codes: 0 success, 2 argument error, 3 input-format error, 4 numerical
// failure, 5 non-convergent field inversion.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cinegroup/anatomy/cardiac_indices.hpp"
#include "cinegroup/anatomy/contour.hpp"
#include "cinegroup/anatomy/propagate.hpp"
#include "cinegroup/anatomy/strain.hpp"
#include "cinegroup/core/tensor_io.hpp"
#include "cinegroup/core/types.hpp"
#include "cinegroup/eval/metrics.hpp"
#include "cinegroup/gwreg/solver.hpp"
#include "cinegroup/io/json_io.hpp"
#include "cinegroup/phantom/phantom.hpp"
#include "cinegroup/version.hpp"
#include "cinegroup/warp/warp.hpp"

namespace fs = std::filesystem;
using namespace cinegroup;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitArgument = 2;
constexpr int kExitInputFormat = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitInversion = 5;

int default_threads() {
    if (const char* env = std::getenv("CINEGROUP_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

struct RunContext {
    io::ManifestBuilder manifest;
    fs::path out_dir;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
    long long started_unix =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch()).count();

    explicit RunContext(std::string command, const fs::path& dir) : out_dir(dir) {
        manifest.command = std::move(command);
        fs::create_directories(out_dir);
    }

    fs::path out(const std::string& name) {
        manifest.outputs.push_back((out_dir / name).string());
        return out_dir / name;
    }

    void finish() {
        manifest.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        manifest.write(out_dir / "manifest.json", started_unix);
    }
};

CineSequence load_sequence(RunContext& ctx, const fs::path& path) {
    ctx.manifest.add_input(path);
    return CineSequence(image_stack_from_tensor(read_container(path)), {1.0, 1.0});
}

LabelMaskSet load_masks(RunContext& ctx, const fs::path& path) {
    ctx.manifest.add_input(path);
    return masks_from_tensor(read_container(path));
}

DisplacementFieldSet load_fields(RunContext& ctx, const fs::path& path) {
    ctx.manifest.add_input(path);
    return fields_from_tensor(read_container(path));
}

void write_csv(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << content;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// ---------------------------------------------------------------------------

struct PhantomArgs {
    std::string out_dir;
    int size = 256, frames = 25;
    int width = 0, height = 0;  // override --size when both set
    double amplitude = 3.0, noise = 0.0, gain = 1.0, offset = 0.0;
    std::uint64_t seed = 7;
};

int cmd_phantom(const PhantomArgs& a) {
    phantom::PhantomSpec spec;
    spec.width = a.width > 0 ? a.width : a.size;
    spec.height = a.height > 0 ? a.height : a.size;
    spec.frames = a.frames;
    spec.amplitude = a.amplitude;
    spec.noise_sigma = a.noise;
    spec.contrast_gain = a.gain;
    spec.contrast_offset = a.offset;
    spec.seed = a.seed;
    spec.validate();

    RunContext ctx("phantom", a.out_dir);
    phantom::PhantomData data = phantom::generate(spec);

    write_container(to_tensor(data.sequence.frames), ctx.out("sequence.cgt"));
    write_container(to_tensor(data.masks), ctx.out("masks.cgt"));
    write_container(to_tensor(data.gt_fields), ctx.out("gt_fields.cgt"));
    {
        std::ofstream out(ctx.out("landmarks.json"));
        out << io::landmarks_to_json(data.landmarks).dump(2) << "\n";
    }
    {
        json ratios;
        const char* chambers[4] = {"LV", "RV", "LA", "RA"};
        for (int c = 0; c < 4; ++c) {
            json arr = json::array();
            for (const auto& frame : data.wall_ratio) arr.push_back(frame[c]);
            ratios[chambers[c]] = arr;
        }
        json meta{{"spec",
                   {{"width", spec.width},
                    {"height", spec.height},
                    {"frames", spec.frames},
                    {"amplitude", spec.amplitude},
                    {"noise_sigma", spec.noise_sigma},
                    {"contrast_gain", spec.contrast_gain},
                    {"contrast_offset", spec.contrast_offset},
                    {"seed", spec.seed}}},
                  {"ed_frame", data.ed_frame},
                  {"es_frame", data.es_frame},
                  {"wall_ratio", ratios}};
        std::ofstream out(ctx.out("phantom.json"));
        out << meta.dump(2) << "\n";
    }
    ctx.manifest.config = json{{"width", spec.width},      {"height", spec.height},
                               {"frames", spec.frames},    {"amplitude", spec.amplitude},
                               {"noise_sigma", spec.noise_sigma}, {"seed", spec.seed}};
    ctx.finish();
    std::cout << "phantom: " << spec.width << "x" << spec.height << "x" << spec.frames
              << " ED=" << data.ed_frame << " ES=" << data.es_frame << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct RegisterArgs {
    std::string sequence, masks, config, gt_fields;
    std::string out_dir;
    int threads = default_threads();
    // config overrides; NaN/-1 means "not set"
    double lambda0 = -1, lambda1 = -1, w0 = -1, w1 = -1, w2 = -1;
    double learning_rate = -1, inversion_tol = -1, charbonnier_eps = -1;
    int window = -1, levels = -1, iterations = -1, inversion_max_iters = -1;
    std::string template_mode;
};

RegistrationConfig effective_config(const RegisterArgs& a, RunContext& ctx) {
    RegistrationConfig cfg;
    if (!a.config.empty()) {
        ctx.manifest.add_input(a.config);
        cfg = io::load_config(a.config, cfg);
    }
    if (a.lambda0 >= 0) cfg.lambda0 = a.lambda0;
    if (a.lambda1 >= 0) cfg.lambda1 = a.lambda1;
    if (a.w0 >= 0) cfg.w0 = a.w0;
    if (a.w1 >= 0) cfg.w1 = a.w1;
    if (a.w2 >= 0) cfg.w2 = a.w2;
    if (a.learning_rate > 0) cfg.learning_rate = a.learning_rate;
    if (a.window > 0) cfg.lncc_window = a.window;
    if (a.levels > 0) cfg.pyramid_levels = a.levels;
    if (a.iterations >= 0) cfg.iterations_per_level = a.iterations;
    if (a.inversion_tol >= 0) cfg.inversion_tol = a.inversion_tol;
    if (a.inversion_max_iters > 0) cfg.inversion_max_iters = a.inversion_max_iters;
    if (a.charbonnier_eps > 0) cfg.charbonnier_eps = a.charbonnier_eps;
    if (!a.template_mode.empty()) {
        if (a.template_mode == "pca")
            cfg.template_mode = TemplateMode::pca;
        else if (a.template_mode == "average")
            cfg.template_mode = TemplateMode::average;
        else
            throw validation_error("--template must be 'average' or 'pca'");
    }
    cfg.validate();
    return cfg;
}

int cmd_register(const RegisterArgs& a) {
    RunContext ctx("register", a.out_dir);
    RegistrationConfig cfg = effective_config(a, ctx);
    ctx.manifest.config = io::config_to_json(cfg);

    CineSequence sequence = load_sequence(ctx, a.sequence);
    LabelMaskSet masks;
    bool have_masks = !a.masks.empty();
    if (have_masks) masks = load_masks(ctx, a.masks);

    auto [fields, trace] =
        gwreg::register_groupwise(sequence, cfg, have_masks ? &masks : nullptr, a.threads);

    write_container(to_tensor(fields), ctx.out("fields.cgt"));

    std::string trace_csv = "iteration,level,width,height,similarity,smoothness,cyclic,"
                            "similarity_d,seg_r,seg_s,total\n";
    for (const auto& level : trace.levels) {
        int it = 0;
        for (const auto& bd : level.iterations) {
            trace_csv += std::to_string(it++) + "," + std::to_string(level.level) + "," +
                         std::to_string(level.width) + "," + std::to_string(level.height) + "," +
                         format_double(bd.similarity) + "," + format_double(bd.smoothness) + "," +
                         format_double(bd.cyclic) + "," + format_double(bd.similarity_d) + "," +
                         format_double(bd.seg_r) + "," + format_double(bd.seg_s) + "," +
                         format_double(bd.total) + "\n";
        }
    }
    write_csv(ctx.out("trace.csv"), trace_csv);

    std::string summary = "key,value\n";
    for (const auto& level : trace.levels) {
        summary += "level" + std::to_string(level.level) + "_initial_total," +
                   format_double(level.initial_total) + "\n";
        summary += "level" + std::to_string(level.level) + "_final_total," +
                   format_double(level.final_total) + "\n";
    }
    auto [jstd, folding] = eval::jacobian_stats(fields);
    summary += "jacobian_std," + format_double(jstd) + "\n";
    summary += "folding_fraction," + format_double(folding) + "\n";
    double worst_residual = 0.0;
    for (double r : trace.final_inversion_residuals) worst_residual = std::max(worst_residual, r);
    summary += "max_inversion_residual," + format_double(worst_residual) + "\n";

    if (!a.gt_fields.empty()) {
        DisplacementFieldSet gt = load_fields(ctx, a.gt_fields);
        if (gt.frame_count() != fields.frame_count() || !gt.fields.front().same_shape(fields.fields.front()))
            throw container_error(container_error::code::shape_mismatch,
                                  "--gt-fields shape does not match the solution");
        double sum = 0.0, worst = 0.0, count = 0.0;
        for (int n = 0; n < gt.frame_count(); ++n)
            for (std::size_t i = 0; i < gt.fields[n].size(); ++i) {
                double e = norm(gt.fields[n][i] - fields.fields[n][i]);
                sum += e;
                worst = std::max(worst, e);
                count += 1.0;
            }
        summary += "epe_mean," + format_double(sum / count) + "\n";
        summary += "epe_max," + format_double(worst) + "\n";
    }
    write_csv(ctx.out("summary.csv"), summary);
    ctx.finish();

    if (trace.diverged) {
        std::cerr << "register: optimization diverged (non-finite loss)\n";
        return kExitNumerical;
    }
    if (!trace.inversions_converged) {
        std::cerr << "register: fixed-point inversion did not converge on the solution fields\n";
        return kExitInversion;
    }
    std::cout << "register: done, final total "
              << format_double(trace.levels.back().final_total) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_invert(const std::string& fields_path, const std::string& out_dir, double tol,
               int max_iters) {
    RunContext ctx("invert", out_dir);
    DisplacementFieldSet fields = load_fields(ctx, fields_path);
    FieldStack inverted(fields.frame_count());
    std::string report = "frame,iterations,residual,converged\n";
    bool all_ok = true;
    for (int n = 0; n < fields.frame_count(); ++n) {
        auto r = warp::invert_field(fields.fields[n], tol, max_iters);
        inverted[n] = std::move(r.field);
        report += std::to_string(n) + "," + std::to_string(r.iterations) + "," +
                  format_double(r.residual) + "," + (r.converged ? "1" : "0") + "\n";
        all_ok = all_ok && r.converged;
    }
    write_container(to_tensor(DisplacementFieldSet(std::move(inverted))),
                    ctx.out("inverse_fields.cgt"));
    write_csv(ctx.out("inversion.csv"), report);
    ctx.manifest.config = json{{"tol", tol}, {"max_iters", max_iters}};
    ctx.finish();
    if (!all_ok) {
        std::cerr << "invert: fixed-point iteration did not converge on every frame\n";
        return kExitInversion;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

int resolve_source_frame(const std::string& spec, const LabelMaskSet& masks) {
    if (spec == "ed") return anatomy::find_ed_es(masks).first;
    int frame = std::stoi(spec);
    if (frame < 0 || frame >= masks.frame_count())
        throw validation_error("source frame out of range");
    return frame;
}

int cmd_propagate(const std::string& masks_path, const std::string& fields_path,
                  const std::string& source, const std::string& out_dir, double tol, int max_iters,
                  int threads) {
    RunContext ctx("propagate", out_dir);
    LabelMaskSet masks = load_masks(ctx, masks_path);
    DisplacementFieldSet fields = load_fields(ctx, fields_path);
    int frame = resolve_source_frame(source, masks);
    LabelMaskSet propagated =
        anatomy::propagate_masks(masks.labels[frame], frame, fields, tol, max_iters, threads);
    write_container(to_tensor(propagated), ctx.out("propagated.cgt"));
    ctx.manifest.config = json{{"source_frame", frame}};
    ctx.finish();
    std::cout << "propagate: source frame " << frame << "\n";
    return kExitOk;
}

int cmd_vote(const std::string& masks_path, const std::string& fields_path,
             const std::string& out_dir, double tol, int max_iters, int threads) {
    RunContext ctx("vote", out_dir);
    LabelMaskSet masks = load_masks(ctx, masks_path);
    DisplacementFieldSet fields = load_fields(ctx, fields_path);
    anatomy::MaskDictionary dict = anatomy::build_dictionary(masks, fields, tol, max_iters, threads);
    LabelMaskSet voted = anatomy::majority_vote(dict);

    int t_count = dict.frame_count(), w = masks.width(), h = masks.height();
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(t_count) * t_count * w * h);
    for (int r = 0; r < t_count; ++r)
        for (int n = 0; n < t_count; ++n)
            raw.insert(raw.end(), dict.entries[r][n].begin(), dict.entries[r][n].end());
    write_container(RawTensor::of_u8({t_count, t_count, h, w}, std::move(raw)),
                    ctx.out("dictionary.cgt"));
    write_container(to_tensor(voted), ctx.out("voted.cgt"));
    ctx.finish();
    std::cout << "vote: " << t_count << "x" << t_count << " dictionary\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

std::vector<int> parse_chambers(const std::string& spec) {
    std::vector<int> out;
    std::string token;
    std::stringstream ss(spec);
    while (std::getline(ss, token, ',')) {
        if (token == "LV") out.push_back(kLV);
        else if (token == "RV") out.push_back(kRV);
        else if (token == "LA") out.push_back(kLA);
        else if (token == "RA") out.push_back(kRA);
        else if (token == "LVM") out.push_back(kLVM);
        else throw validation_error("unknown chamber '" + token + "'");
    }
    if (out.empty()) throw validation_error("no chambers requested");
    return out;
}

int cmd_strain(const std::string& masks_path, const std::string& landmarks_path,
               const std::string& fields_path, const std::string& out_dir,
               const std::string& chambers_spec, int segments, const std::string& ed_spec,
               double sx, double sy, bool write_contours) {
    RunContext ctx("strain", out_dir);
    LabelMaskSet masks = load_masks(ctx, masks_path);
    DisplacementFieldSet fields = load_fields(ctx, fields_path);
    ctx.manifest.add_input(landmarks_path);
    LandmarkSet landmarks = io::load_landmarks(landmarks_path, masks.width(), masks.height());
    int ed = ed_spec == "auto" ? anatomy::find_ed_es(masks).first : std::stoi(ed_spec);
    vec2 spacing{sx, sy};

    if (write_contours) {
        std::vector<std::vector<anatomy::Contour>> per_frame(masks.frame_count());
        for (int n = 0; n < masks.frame_count(); ++n)
            for (int chamber : parse_chambers(chambers_spec))
                per_frame[n].push_back(anatomy::extract_contour(masks.labels[n], chamber, n));
        std::ofstream out(ctx.out("contours.json"));
        out << io::contours_to_json(per_frame, &landmarks).dump(2) << "\n";
    }

    std::string csv = "frame,chamber,epsilon\n";
    std::string seg_csv = "frame,chamber,segment,epsilon\n";
    for (int chamber : parse_chambers(chambers_spec)) {
        anatomy::StrainCurve curve =
            anatomy::gls_curve(masks, landmarks, chamber, fields, ed, segments, spacing);
        const std::string& name = structure_names()[chamber - 1];
        for (std::size_t n = 0; n < curve.epsilon.size(); ++n)
            csv += std::to_string(n) + "," + name + "," + format_double(curve.epsilon[n]) + "\n";
        if (segments > 1) {
            for (int s = 0; s < segments; ++s)
                for (std::size_t n = 0; n < curve.per_segment[s].size(); ++n)
                    seg_csv += std::to_string(n) + "," + name + "," + std::to_string(s + 1) + "," +
                               format_double(curve.per_segment[s][n]) + "\n";
            for (std::size_t n = 0; n < curve.segment_sum.size(); ++n) {
                seg_csv += std::to_string(n) + "," + name + ",sum," +
                           format_double(curve.segment_sum[n]) + "\n";
                seg_csv += std::to_string(n) + "," + name + ",mean," +
                           format_double(curve.segment_mean[n]) + "\n";
            }
        }
    }
    write_csv(ctx.out("strain.csv"), csv);
    if (segments > 1) write_csv(ctx.out("strain_segments.csv"), seg_csv);
    ctx.manifest.config = json{{"segments", segments}, {"ed_frame", ed}};
    ctx.finish();
    return kExitOk;
}

int cmd_volume(const std::string& masks_path, const std::string& landmarks_path,
               const std::string& out_dir, double sx, double sy, double edv_override,
               double esv_override) {
    RunContext ctx("volume", out_dir);
    std::string csv = "record,frame,value\n";
    double edv = 0, esv = 0;
    int ed = -1, es = -1;
    if (edv_override > 0 && esv_override >= 0) {
        edv = edv_override;
        esv = esv_override;
    } else {
        LabelMaskSet masks = load_masks(ctx, masks_path);
        ctx.manifest.add_input(landmarks_path);
        LandmarkSet landmarks = io::load_landmarks(landmarks_path, masks.width(), masks.height());
        vec2 spacing{sx, sy};
        std::tie(ed, es) = anatomy::find_ed_es(masks);
        std::vector<double> volumes(masks.frame_count());
        for (int n = 0; n < masks.frame_count(); ++n) {
            double area = anatomy::chamber_area(masks.labels[n], kLV, spacing);
            // long axis: mitral-valve midpoint to the farthest LV contour point
            anatomy::Contour contour = anatomy::extract_contour(masks.labels[n], kLV, n);
            vec2 mid = 0.5 * (landmarks.points[n][0] + landmarks.points[n][1]);
            double axis = 0.0;
            for (const auto& p : contour.points) {
                vec2 d{(p.x - mid.x) * spacing.x, (p.y - mid.y) * spacing.y};
                axis = std::max(axis, norm(d));
            }
            volumes[n] = anatomy::volume_area_length(area, axis);
            csv += "area," + std::to_string(n) + "," + format_double(area) + "\n";
            csv += "long_axis," + std::to_string(n) + "," + format_double(axis) + "\n";
            csv += "volume," + std::to_string(n) + "," + format_double(volumes[n]) + "\n";
        }
        edv = volumes[ed];
        esv = volumes[es];
    }
    double ef = anatomy::lvef(edv, esv);
    if (esv > edv) std::cerr << "volume: warning, ESV exceeds EDV; LVEF is negative\n";
    csv += "edv," + (ed >= 0 ? std::to_string(ed) : std::string()) + "," + format_double(edv) + "\n";
    csv += "esv," + (es >= 0 ? std::to_string(es) : std::string()) + "," + format_double(esv) + "\n";
    csv += "lvef,," + format_double(ef) + "\n";
    write_csv(ctx.out("volume.csv"), csv);
    ctx.finish();
    return kExitOk;
}

int cmd_metrics(const std::string& pred_path, const std::string& ref_path,
                const std::string& landmarks_path, const std::string& fields_path,
                const std::string& out_dir, double sx, double sy) {
    RunContext ctx("metrics", out_dir);
    LabelMaskSet pred = load_masks(ctx, pred_path);
    LabelMaskSet ref = load_masks(ctx, ref_path);
    vec2 spacing{sx, sy};
    auto [ed, es] = anatomy::find_ed_es(ref);

    LandmarkSet landmarks;
    DisplacementFieldSet fields;
    bool have_landmarks = !landmarks_path.empty() && !fields_path.empty();
    bool have_fields = !fields_path.empty();
    if (have_fields) fields = load_fields(ctx, fields_path);
    if (have_landmarks) {
        ctx.manifest.add_input(landmarks_path);
        landmarks = io::load_landmarks(landmarks_path, ref.width(), ref.height());
    }
    eval::MetricReport report = eval::compute_metric_report(
        pred, ref, es, spacing, have_landmarks ? &landmarks : nullptr,
        have_fields ? &fields : nullptr, ed);

    std::string csv = "name,metric,scope,stat,value\n";
    json j;
    auto emit = [&](const std::string& name, const std::string& metric, const std::string& scope,
                    const eval::MetricStats& s) {
        csv += name + "," + metric + "," + scope + ",mean," + format_double(s.mean) + "\n";
        csv += name + "," + metric + "," + scope + ",std," + format_double(s.stddev) + "\n";
        j[name][metric][scope] = {{"mean", s.mean}, {"std", s.stddev}};
    };
    for (int k = 0; k < kNumStructures; ++k) {
        const std::string& name = structure_names()[k];
        emit(name, "dsc", "all", report.dsc[k]);
        emit(name, "mcd_mm", "all", report.mcd_mm[k]);
        emit(name, "hd_mm", "all", report.hd_mm[k]);
        emit(name, "dsc", "es", report.dsc_es[k]);
        emit(name, "mcd_mm", "es", report.mcd_es[k]);
        emit(name, "hd_mm", "es", report.hd_es[k]);
    }
    if (report.has_landmarks)
        for (int l = 0; l < 4; ++l) {
            std::string name = "landmark" + std::to_string(l + 1);
            emit(name, "mcd_mm", "all", report.landmark_mm[l]);
            emit(name, "mcd_mm", "es", report.landmark_es[l]);
        }
    if (report.has_jacobian) {
        csv += "dvf,jacobian_std,all,value," + format_double(report.jacobian_std) + "\n";
        csv += "dvf,folding_fraction,all,value," + format_double(report.folding_fraction) + "\n";
        j["dvf"] = {{"jacobian_std", report.jacobian_std},
                    {"folding_fraction", report.folding_fraction}};
    }
    j["es_frame"] = report.es_frame;
    write_csv(ctx.out("metrics.csv"), csv);
    {
        std::ofstream out(ctx.out("metrics.json"));
        out << j.dump(2) << "\n";
    }
    ctx.finish();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"groupwise cine registration and cardiac-function quantification"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    PhantomArgs ph;
    auto* sc_phantom = app.add_subcommand("phantom", "generate a synthetic cine with ground truth");
    sc_phantom->add_option("--out-dir", ph.out_dir)->required();
    sc_phantom->add_option("--size", ph.size);
    sc_phantom->add_option("--width", ph.width);
    sc_phantom->add_option("--height", ph.height);
    sc_phantom->add_option("--frames", ph.frames);
    sc_phantom->add_option("--amplitude", ph.amplitude);
    sc_phantom->add_option("--noise", ph.noise);
    sc_phantom->add_option("--gain", ph.gain);
    sc_phantom->add_option("--offset", ph.offset);
    sc_phantom->add_option("--seed", ph.seed);

    RegisterArgs rg;
    auto* sc_register = app.add_subcommand("register", "groupwise registration of a cine sequence");
    sc_register->add_option("--sequence", rg.sequence)->required();
    sc_register->add_option("--out-dir", rg.out_dir)->required();
    sc_register->add_option("--masks", rg.masks);
    sc_register->add_option("--config", rg.config);
    sc_register->add_option("--gt-fields", rg.gt_fields);
    sc_register->add_option("--threads", rg.threads);
    sc_register->add_option("--lambda0", rg.lambda0);
    sc_register->add_option("--lambda1", rg.lambda1);
    sc_register->add_option("--w0", rg.w0);
    sc_register->add_option("--w1", rg.w1);
    sc_register->add_option("--w2", rg.w2);
    sc_register->add_option("--learning-rate", rg.learning_rate);
    sc_register->add_option("--window", rg.window);
    sc_register->add_option("--levels", rg.levels);
    sc_register->add_option("--iterations", rg.iterations);
    sc_register->add_option("--inversion-tol", rg.inversion_tol);
    sc_register->add_option("--inversion-max-iters", rg.inversion_max_iters);
    sc_register->add_option("--charbonnier-eps", rg.charbonnier_eps);
    sc_register->add_option("--template", rg.template_mode);

    std::string in_fields, in_masks, in_landmarks, in_pred, in_ref, out_dir;
    std::string source_frame = "ed", chambers = "LV,RV,LA,RA", ed_spec = "auto";
    double tol = 0.01, sx = 1.0, sy = 1.0, edv = -1, esv = -1;
    int max_iters = 100, threads = default_threads(), segments = 1;

    auto* sc_invert = app.add_subcommand("invert", "fixed-point inversion of a field set");
    sc_invert->add_option("--fields", in_fields)->required();
    sc_invert->add_option("--out-dir", out_dir)->required();
    sc_invert->add_option("--tol", tol);
    sc_invert->add_option("--max-iters", max_iters);

    auto* sc_propagate = app.add_subcommand("propagate", "propagate one frame's mask to all frames");
    sc_propagate->add_option("--masks", in_masks)->required();
    sc_propagate->add_option("--fields", in_fields)->required();
    sc_propagate->add_option("--out-dir", out_dir)->required();
    sc_propagate->add_option("--source", source_frame, "frame index or 'ed'");
    sc_propagate->add_option("--tol", tol);
    sc_propagate->add_option("--max-iters", max_iters);
    sc_propagate->add_option("--threads", threads);

    auto* sc_vote = app.add_subcommand("vote", "build the mask dictionary and majority-vote it");
    sc_vote->add_option("--masks", in_masks)->required();
    sc_vote->add_option("--fields", in_fields)->required();
    sc_vote->add_option("--out-dir", out_dir)->required();
    sc_vote->add_option("--tol", tol);
    sc_vote->add_option("--max-iters", max_iters);
    sc_vote->add_option("--threads", threads);

    bool contours_out = false;
    auto* sc_strain = app.add_subcommand("strain", "global longitudinal strain curves");
    sc_strain->add_option("--masks", in_masks)->required();
    sc_strain->add_option("--landmarks", in_landmarks)->required();
    sc_strain->add_option("--fields", in_fields)->required();
    sc_strain->add_option("--out-dir", out_dir)->required();
    sc_strain->add_option("--chambers", chambers);
    sc_strain->add_option("--segments", segments);
    sc_strain->add_option("--ed", ed_spec, "frame index or 'auto'");
    sc_strain->add_option("--spacing-x", sx);
    sc_strain->add_option("--spacing-y", sy);
    sc_strain->add_flag("--contours-out", contours_out, "also write the extracted contours as JSON");

    auto* sc_volume = app.add_subcommand("volume", "LV volumes and ejection fraction");
    sc_volume->add_option("--masks", in_masks);
    sc_volume->add_option("--landmarks", in_landmarks);
    sc_volume->add_option("--out-dir", out_dir)->required();
    sc_volume->add_option("--spacing-x", sx);
    sc_volume->add_option("--spacing-y", sy);
    sc_volume->add_option("--edv", edv, "direct EDV (mL), bypasses masks");
    sc_volume->add_option("--esv", esv, "direct ESV (mL), bypasses masks");

    auto* sc_metrics = app.add_subcommand("metrics", "DSC/MCD/HD report against reference masks");
    sc_metrics->add_option("--pred", in_pred)->required();
    sc_metrics->add_option("--ref", in_ref)->required();
    sc_metrics->add_option("--out-dir", out_dir)->required();
    sc_metrics->add_option("--landmarks", in_landmarks);
    sc_metrics->add_option("--fields", in_fields);
    sc_metrics->add_option("--spacing-x", sx);
    sc_metrics->add_option("--spacing-y", sy);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitArgument;
    }

    try {
        if (sc_phantom->parsed()) return cmd_phantom(ph);
        if (sc_register->parsed()) return cmd_register(rg);
        if (sc_invert->parsed()) return cmd_invert(in_fields, out_dir, tol, max_iters);
        if (sc_propagate->parsed())
            return cmd_propagate(in_masks, in_fields, source_frame, out_dir, tol, max_iters, threads);
        if (sc_vote->parsed()) return cmd_vote(in_masks, in_fields, out_dir, tol, max_iters, threads);
        if (sc_strain->parsed())
            return cmd_strain(in_masks, in_landmarks, in_fields, out_dir, chambers, segments,
                              ed_spec, sx, sy, contours_out);
        if (sc_volume->parsed())
            return cmd_volume(in_masks, in_landmarks, out_dir, sx, sy, edv, esv);
        if (sc_metrics->parsed())
            return cmd_metrics(in_pred, in_ref, in_landmarks, in_fields, out_dir, sx, sy);
    } catch (const container_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputFormat;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputFormat;
    } catch (const numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArgument;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArgument;
    }
    return kExitArgument;
}
