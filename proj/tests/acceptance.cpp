// Acceptance suite: every criterion prints one PASS/FAIL line with its key
// numbers and runtime. The binary exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "cinegroup/anatomy/cardiac_indices.hpp"
#include "cinegroup/anatomy/distance_map.hpp"
#include "cinegroup/anatomy/propagate.hpp"
#include "cinegroup/anatomy/strain.hpp"
#include "cinegroup/core/tensor_io.hpp"
#include "cinegroup/eval/metrics.hpp"
#include "cinegroup/gwreg/solver.hpp"
#include "cinegroup/io/json_io.hpp"
#include "cinegroup/loss/composite.hpp"
#include "cinegroup/phantom/phantom.hpp"
#include "cinegroup/warp/warp.hpp"
#include "../tests/gradient_fixture.hpp"
#include "../tests/oracles.hpp"

using namespace cinegroup;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(int id, const std::string& label, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[%s] criterion %d: %s (%s, %.1fs)\n", pass ? "PASS" : "FAIL", id, label.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* format, ...) {
    char buf[256];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

double mean_epe(const DisplacementFieldSet& a, const DisplacementFieldSet& b) {
    double sum = 0.0, count = 0.0;
    for (int n = 0; n < a.frame_count(); ++n)
        for (std::size_t i = 0; i < a.fields[n].size(); ++i) {
            sum += norm(a.fields[n][i] - b.fields[n][i]);
            count += 1.0;
        }
    return sum / count;
}

double mean_structure_dsc(const LabelMaskSet& pred, const LabelMaskSet& ref, int frame) {
    double sum = 0.0;
    for (int k = 1; k <= kNumStructures; ++k)
        sum += eval::dsc_metric(pred.labels[frame], ref.labels[frame], k);
    return sum / kNumStructures;
}

double mean_landmark_error(const eval::LandmarkErrorReport& report) {
    double sum = 0.0, count = 0.0;
    for (const auto& frame : report.per_frame)
        for (double v : frame) {
            sum += v;
            count += 1.0;
        }
    return sum / count;
}

RegistrationConfig acceptance_config() {
    // direct dense optimization needs a pixel-scale step; everything else is
    // the reference operating point (lambda0 0.8, lambda1 0.01, w0 5, w1 1)
    RegistrationConfig cfg;
    cfg.learning_rate = 0.15;
    cfg.iterations_per_level = 300;
    cfg.pyramid_levels = 3;
    return cfg;
}

}  // namespace

int main() {
    // ---- criterion 1: gradient fidelity ------------------------------------
    {
        Timer timer;
        auto fx = gradient_fixture::make(true);
        double err = gwreg::gradient_check(fx.frames, fx.fields, fx.cfg, &fx.guide);
        double secs = timer.seconds();
        report(1, "gradient fidelity, all weights nonzero",
               err < 1e-4 && secs < 10.0, fmt("max rel err %.2e", err), secs);
    }

    // ---- criterion 2: inversion contract -----------------------------------
    {
        Timer timer;
        double worst_residual = 0.0, worst_gradient = 0.0;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            oracles::Rng rng(4000 + seed);
            int size = 24 + 4 * static_cast<int>(seed % 4);
            // the sinusoid gradient scales like amplitude * 2 pi / size; keep
            // the construction inside the |grad| < 0.5 contract with margin
            double amplitude = rng.uniform(0.5, 0.38 * size / (2.0 * std::numbers::pi));
            Field f = oracles::smooth_field(rng, size, size, amplitude);
            // construction sanity: the contract covers fields with |grad| < 0.5
            for (int y = 0; y + 1 < size; ++y)
                for (int x = 0; x + 1 < size; ++x) {
                    worst_gradient = std::max(worst_gradient, norm(f(x + 1, y) - f(x, y)));
                    worst_gradient = std::max(worst_gradient, norm(f(x, y + 1) - f(x, y)));
                }
            auto inv = warp::invert_field(f, 1e-4, 500);
            Field residual = warp::compose(f, inv.field);
            for (const auto& v : residual) worst_residual = std::max(worst_residual, norm(v));
        }
        double secs = timer.seconds();
        report(2, "fixed-point inversion contract over 50 smooth fields",
               worst_residual < 0.05 && worst_gradient < 0.5 && secs < 30.0,
               fmt("max residual %.3f px, max field gradient %.2f", worst_residual, worst_gradient),
               secs);
    }

    // ---- shared phantom + registrations for criteria 3-6 -------------------
    phantom::PhantomSpec spec;
    spec.width = spec.height = 64;
    spec.frames = 8;
    spec.amplitude = 3.0;
    spec.noise_sigma = 0.01;
    spec.seed = 7;
    phantom::PhantomData data = phantom::generate(spec);
    RegistrationConfig cfg = acceptance_config();

    DisplacementFieldSet plain_fields;
    {
        Timer timer;
        auto [fields, trace] = gwreg::register_groupwise(data.sequence, cfg, nullptr, 1);
        plain_fields = std::move(fields);
        double epe = mean_epe(plain_fields, data.gt_fields);
        auto [jstd, folding] = eval::jacobian_stats(plain_fields);
        double secs = timer.seconds();
        report(3, "phantom registration accuracy and field quality",
               !trace.diverged && epe < 0.5 && folding <= 0.005 && secs < 120.0,
               fmt("mean EPE %.3f px, folding fraction %.4f", epe, folding), secs);
    }

    {
        Timer timer;
        auto [guided_fields, trace] = gwreg::register_groupwise(data.sequence, cfg, &data.masks, 1);
        auto guided = eval::landmark_error(data.landmarks, guided_fields, data.ed_frame);
        auto plain = eval::landmark_error(data.landmarks, plain_fields, data.ed_frame);
        double guided_err = mean_landmark_error(guided);
        double plain_err = mean_landmark_error(plain);
        double secs = timer.seconds();
        report(4, "anatomical guidance non-inferiority on landmark transfer",
               !trace.diverged && guided_err <= plain_err && secs < 240.0,
               fmt("guided %.3f mm vs plain %.3f mm", guided_err, plain_err), secs);
    }

    // criteria 5 and 6 run on a 128 px phantom: at 64 px the thin myocardial
    // ring loses ~0.09 DSC to mask rasterization alone, under ground-truth
    // fields, so propagation quality is measured where rasterization does
    // not dominate; the 64 px grid above stays the registration benchmark
    phantom::PhantomSpec spec128 = spec;
    spec128.width = spec128.height = 128;
    phantom::PhantomData data128 = phantom::generate(spec128);
    DisplacementFieldSet fields128;
    LabelMaskSet propagated;
    {
        Timer timer;
        auto [fields, trace] = gwreg::register_groupwise(data128.sequence, cfg, nullptr, 1);
        fields128 = std::move(fields);
        propagated = anatomy::propagate_masks(data128.masks.labels[data128.ed_frame],
                                              data128.ed_frame, fields128, cfg.inversion_tol,
                                              cfg.inversion_max_iters, 1);
        double worst_frame = 1.0, single_mean = 0.0;
        for (int n = 0; n < data128.masks.frame_count(); ++n) {
            double d = mean_structure_dsc(propagated, data128.masks, n);
            worst_frame = std::min(worst_frame, d);
            single_mean += d / data128.masks.frame_count();
        }
        auto dict = anatomy::build_dictionary(data128.masks, fields128, cfg.inversion_tol,
                                              cfg.inversion_max_iters, 1);
        LabelMaskSet voted = anatomy::majority_vote(dict);
        double voted_mean = 0.0;
        for (int n = 0; n < data128.masks.frame_count(); ++n)
            voted_mean += mean_structure_dsc(voted, data128.masks, n) / data128.masks.frame_count();
        double secs = timer.seconds();
        report(5, "ED propagation quality and majority-vote non-inferiority",
               !trace.diverged && worst_frame >= 0.95 && voted_mean >= single_mean && secs < 60.0,
               fmt("min frame DSC %.3f, voted %.4f vs single-source %.4f", worst_frame, voted_mean,
                   single_mean),
               secs);
    }

    {
        Timer timer;
        bool pass = true;
        std::string detail;

        // scaled-contour fixture: epsilon = s - 1 exactly
        anatomy::Contour circle;
        circle.label = kLV;
        vec2 center{50, 50};
        for (int i = 0; i < 720; ++i) {
            double a = 2.0 * std::numbers::pi * i / 720;
            circle.points.push_back({center.x + 20 * std::cos(a), center.y + 20 * std::sin(a)});
        }
        double s = 0.8;
        anatomy::Contour scaled = circle;
        for (auto& p : scaled.points) p = center + s * (p - center);
        vec2 ha{70, 50}, hb{50, 70};
        auto curve_fixture = anatomy::gls_from_contours(
            {circle, scaled}, {{ha, hb}, {center + s * (ha - center), center + s * (hb - center)}}, 0);
        double fixture_err = std::abs(curve_fixture.epsilon[1] - (s - 1.0));
        pass = pass && fixture_err < 1e-6;

        // phantom GLS via the estimated fields and propagated masks
        anatomy::StrainCurve lv = anatomy::gls_curve(propagated, data128.landmarks, kLV, fields128,
                                                     data128.ed_frame, 1, {1.0, 1.0});
        double trough = 1e300, analytic_trough = 1e300;
        for (int n = 0; n < data128.masks.frame_count(); ++n) {
            trough = std::min(trough, lv.epsilon[n]);
            analytic_trough = std::min(analytic_trough, data128.wall_ratio[n][0] - 1.0);
        }
        double trough_err = std::abs(trough - analytic_trough);
        pass = pass && trough_err < 0.02;
        pass = pass && lv.epsilon[data128.ed_frame] == 0.0;

        report(6, "strain exactness and phantom GLS trough", pass,
               fmt("fixture err %.1e, trough %.3f vs analytic %.3f, ED strain %g", fixture_err,
                   trough, analytic_trough, lv.epsilon[data128.ed_frame]),
               timer.seconds());
    }

    // ---- criterion 7: metric oracles ---------------------------------------
    {
        Timer timer;
        bool pass = true;
        for (int trial = 0; trial < 25 && pass; ++trial) {
            oracles::Rng rng(6000 + trial);
            // two random rectangles per label
            LabelImage a(16, 16, 0), b(16, 16, 0);
            auto stamp = [&](LabelImage& m, int label) {
                int x0 = rng.uniform_int(1, 8), y0 = rng.uniform_int(1, 8);
                int x1 = x0 + rng.uniform_int(3, 6), y1 = y0 + rng.uniform_int(3, 6);
                for (int y = y0; y < std::min(15, y1); ++y)
                    for (int x = x0; x < std::min(15, x1); ++x)
                        m(x, y) = static_cast<std::uint8_t>(label);
            };
            stamp(a, kLV);
            stamp(b, kLV);

            // DSC: exact set arithmetic
            std::size_t inter = 0, ca = 0, cb = 0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                inter += (a[i] == kLV && b[i] == kLV) ? 1 : 0;
                ca += a[i] == kLV ? 1 : 0;
                cb += b[i] == kLV ? 1 : 0;
            }
            double want_dsc = ca + cb == 0 ? 1.0 : 2.0 * inter / static_cast<double>(ca + cb);
            pass = pass && eval::dsc_metric(a, b, kLV) == want_dsc;

            // distance transform: exact vs brute force
            auto seeds = anatomy::boundary_pixels(a, kLV);
            Image got = anatomy::distance_map(a, kLV);
            Image ref_sq = oracles::brute_force_sq_distance(seeds);
            for (std::size_t i = 0; i < got.size() && pass; ++i) {
                double want = std::min(std::sqrt(ref_sq[i]), 20.0) / 20.0;
                pass = pass && std::abs(got[i] - want) < 1e-12;
            }

            // contour metrics within 1e-3 mm of the dense-resampling oracle
            anatomy::Contour contour_a = anatomy::extract_contour(a, kLV);
            anatomy::Contour contour_b = anatomy::extract_contour(b, kLV);
            double step = 2.5e-4;
            pass = pass && std::abs(eval::mcd(contour_a, contour_b) -
                                    oracles::mcd_reference(contour_a.points, contour_b.points,
                                                           step)) < 1e-3;
            pass = pass && std::abs(eval::hd(contour_a, contour_b) -
                                    oracles::hd_reference(contour_a.points, contour_b.points,
                                                          step)) < 1e-3;
        }
        double secs = timer.seconds();
        report(7, "metric implementations match brute-force oracles on 25 instances",
               pass && secs < 30.0, pass ? "all exact/within 1e-3 mm" : "mismatch", secs);
    }

    // ---- criterion 8: closed forms -----------------------------------------
    {
        Timer timer;
        bool pass = true;
        std::ostringstream detail;

        double t = 0.37;
        int n_frames = 7;
        FieldStack constant(n_frames, Field(16, 16, vec2{t, 0.0}));
        double cyc = loss::cyclic_loss(constant);
        double cyc_err = std::abs(cyc - t * std::sqrt(n_frames / 2.0));
        pass = pass && cyc_err < 1e-10;

        double c = 0.1;
        FieldStack linear(2, Field(64, 64));
        for (auto& f : linear)
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x) f(x, y) = vec2{c * x, 0.0};
        double smooth = loss::smoothness_loss(linear, 1e-6);
        pass = pass && std::abs(smooth - c / 2) / (c / 2) < 0.05;

        oracles::Rng rng(81);
        Image img = oracles::random_image(rng, 32, 32);
        Image affine(32, 32);
        for (std::size_t i = 0; i < img.size(); ++i) affine[i] = 1.7 * img[i] + 0.4;
        double lncc_err = std::abs(loss::lncc(img, affine, 9) - 1.0);
        pass = pass && lncc_err < 1e-6;

        double r = 23.0;
        double vol = anatomy::volume_area_length(std::numbers::pi * r * r, 2.0 * r);
        double vol_err = std::abs(vol - 4.0 / 3.0 * std::numbers::pi * r * r * r / 1000.0);
        pass = pass && vol_err < 1e-9;

        detail << fmt("cyclic err %.1e, smoothness %.4f vs %.4f, lncc err %.1e, volume err %.1e",
                      cyc_err, smooth, c / 2, lncc_err, vol_err);
        report(8, "closed-form identities", pass, detail.str(), timer.seconds());
    }

    // ---- criterion 9: CLI determinism --------------------------------------
    {
        Timer timer;
        fs::path base = fs::temp_directory_path() / "cinegroup_acceptance";
        fs::remove_all(base);
        fs::create_directories(base);
        auto run = [&](const std::string& args) {
            std::string cmd = std::string(CINEGROUP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
            int status = std::system(cmd.c_str());
            return status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
        };
        bool pass = run("phantom --size 32 --frames 4 --amplitude 1.5 --noise 0.01 --seed 5 "
                        "--out-dir " + (base / "ph").string());
        std::string reg_flags = "register --sequence " + (base / "ph" / "sequence.cgt").string() +
                                " --learning-rate 0.25 --levels 2 --iterations 25 --out-dir ";
        pass = pass && run(reg_flags + (base / "r1").string());
        pass = pass && run(reg_flags + (base / "r2").string());
        auto slurp = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            std::stringstream ss;
            ss << in.rdbuf();
            return ss.str();
        };
        pass = pass && !slurp(base / "r1" / "fields.cgt").empty() &&
               slurp(base / "r1" / "fields.cgt") == slurp(base / "r2" / "fields.cgt");
        report(9, "cmd_register determinism (byte-identical field containers)", pass,
               pass ? "identical bytes" : "containers differ", timer.seconds());
    }

    std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
                failures);
    return failures == 0 ? 0 : 1;
}
