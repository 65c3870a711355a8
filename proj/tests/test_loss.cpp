#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cinegroup/loss/boxsum.hpp"
#include "cinegroup/loss/composite.hpp"
#include "cinegroup/loss/lncc.hpp"
#include "cinegroup/loss/templates.hpp"
#include "cinegroup/anatomy/distance_map.hpp"
#include "cinegroup/loss/terms.hpp"
#include "oracles.hpp"

using namespace cinegroup;

TEST_CASE("box sums match the adjoint identity", "[loss]") {
    oracles::Rng rng(7);
    for (int radius : {1, 2, 4}) {
        Image f = oracles::random_image(rng, 13, 9, -1, 1);
        Image g = oracles::random_image(rng, 13, 9, -1, 1);
        Image lf = loss::box_sum(f, radius);
        Image ltg = loss::box_sum_adjoint(g, radius);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            lhs += lf[i] * g[i];
            rhs += f[i] * ltg[i];
        }
        REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("lncc basic identities", "[loss]") {
    oracles::Rng rng(13);
    Image a = oracles::random_image(rng, 32, 32);

    SECTION("perfect correlation") {
        REQUIRE(loss::lncc(a, a, 9) == Catch::Approx(1.0).margin(1e-6));
    }

    SECTION("affine invariance with positive gain") {
        Image b(32, 32);
        for (std::size_t i = 0; i < a.size(); ++i) b[i] = 2.0 * a[i] + 3.0;
        REQUIRE(loss::lncc(a, b, 9) == Catch::Approx(1.0).margin(1e-6));
        REQUIRE(std::abs(loss::lncc(a, b, 9) - loss::lncc(a, a, 9)) < 1e-6);
    }

    SECTION("negative gain") {
        Image b(32, 32);
        for (std::size_t i = 0; i < a.size(); ++i) b[i] = -a[i];
        REQUIRE(loss::lncc(a, b, 9) == Catch::Approx(-1.0).margin(1e-6));
    }

    SECTION("independent noise decorrelates") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            oracles::Rng r1(1000 + seed), r2(5000 + 31 * seed);
            Image x = oracles::random_image(r1, 64, 64);
            Image y = oracles::random_image(r2, 64, 64);
            REQUIRE(std::abs(loss::lncc(x, y, 9)) < 0.05);
        }
    }

    SECTION("matches the naive per-window reference") {
        Image b = oracles::random_image(rng, 32, 32);
        for (int window : {3, 5, 9}) {
            double got = loss::lncc(a, b, window);
            double want = oracles::lncc_reference(a, b, window);
            REQUIRE(got == Catch::Approx(want).margin(1e-10));
        }
    }

    SECTION("argument validation") {
        REQUIRE_THROWS_AS(loss::lncc(a, oracles::random_image(rng, 16, 16), 9), validation_error);
        REQUIRE_THROWS_AS(loss::lncc(a, a, 8), validation_error);
        REQUIRE_THROWS_AS(loss::lncc(a, a, 63), validation_error);
    }
}

TEST_CASE("lncc analytic gradient matches finite differences", "[loss]") {
    oracles::Rng rng(17);
    Image a = oracles::random_image(rng, 10, 10);
    Image b = oracles::random_image(rng, 10, 10);
    Image ga(10, 10, 0.0), gb(10, 10, 0.0);
    loss::lncc_grad(a, b, 5, 1.0, &ga, &gb);
    double h = 1e-6;
    for (std::size_t i = 0; i < a.size(); i += 7) {
        Image ap = a;
        ap[i] += h;
        Image am = a;
        am[i] -= h;
        double fd = (loss::lncc(ap, b, 5) - loss::lncc(am, b, 5)) / (2 * h);
        REQUIRE(ga[i] == Catch::Approx(fd).margin(1e-6));

        Image bp = b;
        bp[i] += h;
        Image bm = b;
        bm[i] -= h;
        double fdb = (loss::lncc(a, bp, 5) - loss::lncc(a, bm, 5)) / (2 * h);
        REQUIRE(gb[i] == Catch::Approx(fdb).margin(1e-6));
    }
}

TEST_CASE("templates", "[loss]") {
    oracles::Rng rng(23);

    SECTION("average equals the brute-force mean") {
        ImageStack stack;
        for (int n = 0; n < 5; ++n) stack.push_back(oracles::random_image(rng, 12, 12));
        auto t = loss::average_template(stack);
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 12; ++x) {
                double mean = 0.0;
                for (const auto& f : stack) mean += f(x, y);
                mean /= 5.0;
                REQUIRE(t.pixels(x, y) == Catch::Approx(mean).margin(1e-7));
            }
    }

    SECTION("two constant frames average to the midpoint") {
        ImageStack stack{Image(8, 8, 0.0), Image(8, 8, 1.0)};
        auto t = loss::average_template(stack);
        for (double v : t.pixels) REQUIRE(v == Catch::Approx(0.5));
    }

    SECTION("pca weights match the closed-form 2x2 eigensolver") {
        Image base = oracles::random_image(rng, 16, 16);
        Image other(16, 16);
        for (std::size_t i = 0; i < base.size(); ++i)
            other[i] = 0.8 * base[i] + 0.2 * rng.uniform();
        ImageStack stack{base, other};

        // frames-as-variables covariance about each frame's spatial mean
        auto spatial_mean = [](const Image& img) {
            double s = 0;
            for (double v : img) s += v;
            return s / img.size();
        };
        double m0 = spatial_mean(stack[0]), m1 = spatial_mean(stack[1]);
        double c00 = 0, c01 = 0, c11 = 0;
        for (std::size_t i = 0; i < base.size(); ++i) {
            c00 += (stack[0][i] - m0) * (stack[0][i] - m0);
            c01 += (stack[0][i] - m0) * (stack[1][i] - m1);
            c11 += (stack[1][i] - m1) * (stack[1][i] - m1);
        }
        c00 /= base.size();
        c01 /= base.size();
        c11 /= base.size();
        auto v = oracles::leading_eigenvector_2x2(c00, c01, c11);
        double sum = v[0] + v[1];
        std::array<double, 2> expected{v[0] / sum, v[1] / sum};

        auto t = loss::pca_template(stack);
        REQUIRE(t.weights.size() == 2);
        REQUIRE(t.weights[0] == Catch::Approx(expected[0]).margin(1e-8));
        REQUIRE(t.weights[1] == Catch::Approx(expected[1]).margin(1e-8));
        REQUIRE(t.weights[0] + t.weights[1] == Catch::Approx(1.0).margin(1e-12));
    }

    SECTION("identical frames reproduce the average template") {
        Image base = oracles::random_image(rng, 12, 12);
        ImageStack stack(4, base);
        auto pca = loss::pca_template(stack);
        auto avg = loss::average_template(stack);
        double wsum = 0.0;
        for (double w : pca.weights) wsum += w;
        REQUIRE(wsum == Catch::Approx(1.0).margin(1e-10));
        for (std::size_t i = 0; i < base.size(); ++i)
            REQUIRE(pca.pixels[i] == Catch::Approx(avg.pixels[i]).margin(1e-9));
    }

    SECTION("weights sum to 1 over random stacks") {
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            oracles::Rng r(300 + seed);
            ImageStack stack;
            Image base = oracles::random_image(r, 10, 10);
            for (int n = 0; n < 4; ++n) {
                Image f = base;
                for (auto& v : f) v += 0.1 * r.uniform(-1, 1);
                stack.push_back(f);
            }
            auto t = loss::pca_template(stack);
            double wsum = 0.0;
            for (double w : t.weights) wsum += w;
            REQUIRE(wsum == Catch::Approx(1.0).margin(1e-9));
        }
    }
}

TEST_CASE("similarity_loss", "[loss]") {
    oracles::Rng rng(29);
    Image tmpl = oracles::random_image(rng, 16, 16);

    SECTION("frames equal to the template give 0") {
        ImageStack stack(3, tmpl);
        REQUIRE(loss::similarity_loss(stack, tmpl, 5) == Catch::Approx(0.0).margin(1e-6));
    }

    SECTION("alternating +/- template gives 1") {
        Image neg(16, 16);
        for (std::size_t i = 0; i < tmpl.size(); ++i) neg[i] = -tmpl[i];
        ImageStack stack{tmpl, neg, tmpl, neg};
        REQUIRE(loss::similarity_loss(stack, tmpl, 5) == Catch::Approx(1.0).margin(1e-6));
    }

    SECTION("matches a per-frame loop") {
        ImageStack stack;
        for (int n = 0; n < 4; ++n) stack.push_back(oracles::random_image(rng, 16, 16));
        double manual = 0.0;
        for (const auto& f : stack) manual += oracles::lncc_reference(f, tmpl, 5);
        manual = 1.0 - manual / 4.0;
        REQUIRE(loss::similarity_loss(stack, tmpl, 5) == Catch::Approx(manual).margin(1e-6));
    }
}

TEST_CASE("smoothness_loss", "[loss]") {
    SECTION("constant fields cost (almost) nothing") {
        FieldStack fields(3, Field(16, 16, vec2{2.0, -1.0}));
        REQUIRE(loss::smoothness_loss(fields, 1e-6) < 1e-5);
    }

    SECTION("linear field closed form c/2") {
        double c = 0.1;
        FieldStack fields(2, Field(64, 64));
        for (auto& f : fields)
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x) f(x, y) = vec2{c * x, 0.0};
        double got = loss::smoothness_loss(fields, 1e-6);
        REQUIRE(got == Catch::Approx(c / 2).epsilon(0.05));
        // exact finite-grid value, up to the charbonnier floor on zero terms
        REQUIRE(got == Catch::Approx(c * 63.0 / 128.0).margin(5e-6));
    }

    SECTION("matches the double-loop reference") {
        oracles::Rng rng(31);
        FieldStack fields;
        for (int n = 0; n < 3; ++n) fields.push_back(oracles::smooth_field(rng, 12, 12, 2.0));
        double got = loss::smoothness_loss(fields, 1e-6);
        REQUIRE(got == Catch::Approx(oracles::smoothness_reference(fields, 1e-6)).margin(1e-8));
    }
}

TEST_CASE("cyclic_loss", "[loss]") {
    SECTION("fields summing to zero per pixel") {
        oracles::Rng rng(37);
        Field f = oracles::smooth_field(rng, 12, 12, 2.0);
        Field neg(12, 12);
        for (std::size_t i = 0; i < f.size(); ++i) neg[i] = -1.0 * f[i];
        FieldStack fields{f, neg};
        REQUIRE(loss::cyclic_loss(fields) == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("constant translation closed form t sqrt(N/2)") {
        double t = 0.3;
        int n = 5;
        FieldStack fields(n, Field(16, 16, vec2{t, 0.0}));
        REQUIRE(loss::cyclic_loss(fields) ==
                Catch::Approx(t * std::sqrt(n / 2.0)).margin(1e-10));
    }

    SECTION("matches the naive reference") {
        oracles::Rng rng(41);
        FieldStack fields;
        for (int n = 0; n < 4; ++n) fields.push_back(oracles::smooth_field(rng, 10, 10, 1.5));
        REQUIRE(loss::cyclic_loss(fields) ==
                Catch::Approx(oracles::cyclic_reference(fields)).margin(1e-10));
    }
}

namespace {

loss::ProbStack one_hot(const LabelStack& masks) {
    loss::ProbStack probs(masks.size(), std::vector<Image>(kNumStructures + 1));
    for (std::size_t n = 0; n < masks.size(); ++n) {
        for (auto& ch : probs[n]) ch = Image(masks[n].width(), masks[n].height(), 0.0);
        for (int y = 0; y < masks[n].height(); ++y)
            for (int x = 0; x < masks[n].width(); ++x) probs[n][masks[n](x, y)](x, y) = 1.0;
    }
    return probs;
}

}  // namespace

TEST_CASE("dice_loss", "[loss]") {
    SECTION("perfect prediction scores 0") {
        LabelStack gt(2, LabelImage(16, 16, 0));
        for (int k = 1; k <= kNumStructures; ++k)
            for (int y = 0; y < 3; ++y)
                for (int x = 0; x < 16; ++x) gt[0](x, 3 * (k - 1) + y) = static_cast<std::uint8_t>(k);
        gt[1] = gt[0];
        REQUIRE(loss::dice_loss(gt, gt) == Catch::Approx(0.0).margin(1e-6));
        REQUIRE(loss::dice_loss(one_hot(gt), gt) == Catch::Approx(0.0).margin(1e-6));
    }

    SECTION("disjoint equal-size masks score 1") {
        LabelStack gt(1, LabelImage(20, 20, 0)), pred(1, LabelImage(20, 20, 0));
        for (int k = 1; k <= kNumStructures; ++k)
            for (int x = 0; x < 10; ++x) {
                gt[0](x, 2 * (k - 1)) = static_cast<std::uint8_t>(k);
                pred[0](x, 2 * (k - 1) + 1) = static_cast<std::uint8_t>(k);
            }
        REQUIRE(loss::dice_loss(pred, gt) == Catch::Approx(1.0).margin(1e-5));
    }

    SECTION("half overlap with half-size prediction gives 1/3") {
        // per structure: pred covers half of gt and nothing else
        LabelStack gt(1, LabelImage(20, 20, 0)), pred(1, LabelImage(20, 20, 0));
        for (int k = 1; k <= kNumStructures; ++k)
            for (int x = 0; x < 16; ++x) {
                gt[0](x, k - 1) = static_cast<std::uint8_t>(k);
                if (x < 8) pred[0](x, k - 1) = static_cast<std::uint8_t>(k);
            }
        REQUIRE(loss::dice_loss(pred, gt) == Catch::Approx(1.0 / 3.0).margin(1e-5));
    }
}

TEST_CASE("ce_loss", "[loss]") {
    LabelStack gt(1, LabelImage(8, 8, 0));
    for (int x = 0; x < 8; ++x) gt[0](x, 0) = kLV;

    SECTION("one-hot correct prediction gives 0") {
        REQUIRE(loss::ce_loss(one_hot(gt), gt) == Catch::Approx(0.0).margin(1e-9));
    }

    SECTION("uniform prediction gives ln 6") {
        loss::ProbStack probs(1, std::vector<Image>(6, Image(8, 8, 1.0 / 6.0)));
        REQUIRE(loss::ce_loss(probs, gt) == Catch::Approx(std::log(6.0)).margin(1e-9));
    }

    SECTION("p(true) = 0.5 gives ln 2") {
        loss::ProbStack probs(1, std::vector<Image>(6, Image(8, 8, 0.1)));
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) probs[0][gt[0](x, y)](x, y) = 0.5;
        REQUIRE(loss::ce_loss(probs, gt) == Catch::Approx(std::log(2.0)).margin(1e-9));
    }
}

TEST_CASE("distance_similarity_loss", "[loss]") {
    oracles::Rng rng(43);
    std::vector<Image> tmpl;
    for (int k = 0; k < kNumStructures; ++k) tmpl.push_back(oracles::random_image(rng, 16, 16));

    SECTION("identical maps give 0") {
        std::vector<std::vector<Image>> warped(3, tmpl);
        REQUIRE(loss::distance_similarity_loss(warped, tmpl, 5) == Catch::Approx(0.0).margin(1e-6));
    }

    SECTION("matches the loop reference") {
        std::vector<std::vector<Image>> warped;
        for (int n = 0; n < 3; ++n) {
            std::vector<Image> frame;
            for (int k = 0; k < kNumStructures; ++k) {
                Image m = tmpl[k];
                for (auto& v : m) v = std::clamp(v + 0.05 * rng.uniform(-1, 1), 0.0, 1.0);
                frame.push_back(m);
            }
            warped.push_back(frame);
        }
        double manual = 0.0;
        for (const auto& frame : warped)
            for (int k = 0; k < kNumStructures; ++k)
                manual += oracles::lncc_reference(frame[k], tmpl[k], 5);
        manual = 1.0 - manual / (3.0 * kNumStructures);
        REQUIRE(loss::distance_similarity_loss(warped, tmpl, 5) ==
                Catch::Approx(manual).margin(1e-6));
    }
}

TEST_CASE("composite_loss weight algebra and statics", "[loss]") {
    oracles::Rng rng(47);

    SECTION("with w0=w1=w2=0 the total is exactly the registration objective") {
        ImageStack frames;
        for (int n = 0; n < 4; ++n) frames.push_back(oracles::random_image(rng, 16, 16));
        FieldStack fields;
        for (int n = 0; n < 4; ++n) fields.push_back(oracles::smooth_field(rng, 16, 16, 1.0));
        RegistrationConfig cfg;
        cfg.w0 = cfg.w1 = cfg.w2 = 0.0;
        cfg.lncc_window = 5;
        auto bd = loss::composite_loss(frames, fields, cfg);
        REQUIRE(bd.similarity_d == 0.0);
        REQUIRE(bd.seg_r == 0.0);
        REQUIRE(bd.seg_s == 0.0);
        REQUIRE(bd.total ==
                Catch::Approx(bd.similarity + 0.8 * bd.smoothness + 0.01 * bd.cyclic).margin(1e-12));
    }

    SECTION("static sequence with zero fields and no masks scores 0") {
        Image frame = oracles::random_image(rng, 16, 16);
        ImageStack frames(4, frame);
        FieldStack fields(4, zero_field(16, 16));
        RegistrationConfig cfg;
        cfg.lncc_window = 5;
        cfg.charbonnier_eps = 1e-9;
        auto bd = loss::composite_loss(frames, fields, cfg);
        REQUIRE(bd.total == Catch::Approx(0.0).margin(1e-6));
    }

    SECTION("breakdown reconstruction identity holds with all terms active") {
        ImageStack frames;
        for (int n = 0; n < 3; ++n) frames.push_back(oracles::random_image(rng, 16, 16));
        FieldStack fields;
        for (int n = 0; n < 3; ++n) fields.push_back(oracles::smooth_field(rng, 16, 16, 0.8));
        LabelStack masks(3, LabelImage(16, 16, 0));
        for (int n = 0; n < 3; ++n)
            for (int y = 4; y < 12; ++y)
                for (int x = 4; x < 12; ++x) masks[n](x, y) = kLV;
        auto dmaps = anatomy::distance_transform(masks);
        loss::GuidanceData guide{&masks, &dmaps, 0};
        RegistrationConfig cfg;
        cfg.lncc_window = 5;
        auto bd = loss::composite_loss(frames, fields, cfg, &guide);
        REQUIRE(bd.total == Catch::Approx(bd.similarity + cfg.lambda0 * bd.smoothness +
                                          cfg.lambda1 * bd.cyclic + cfg.w0 * bd.similarity_d +
                                          cfg.w1 * bd.seg_r + cfg.w2 * bd.seg_s)
                                .margin(1e-10));
        REQUIRE(bd.similarity_d > 0.0);
        REQUIRE(bd.seg_r > 0.0);
        REQUIRE(bd.seg_s == 0.0);
    }

    SECTION("loss terms are non-negative and similarity stays in [0, 2]") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            oracles::Rng r(700 + seed);
            ImageStack frames;
            FieldStack fields;
            for (int n = 0; n < 3; ++n) {
                frames.push_back(oracles::random_image(r, 12, 12));
                fields.push_back(oracles::smooth_field(r, 12, 12, 1.0));
            }
            RegistrationConfig cfg;
            cfg.lncc_window = 5;
            auto bd = loss::composite_loss(frames, fields, cfg);
            REQUIRE(bd.similarity >= 0.0);
            REQUIRE(bd.similarity <= 2.0);
            REQUIRE(bd.smoothness >= 0.0);
            REQUIRE(bd.cyclic >= 0.0);
        }
    }
}
