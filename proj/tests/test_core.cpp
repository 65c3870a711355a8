#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cinegroup/core/tensor_io.hpp"
#include "cinegroup/core/types.hpp"
#include "oracles.hpp"

using namespace cinegroup;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    auto dir = fs::temp_directory_path() / "cinegroup_tests";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("container round-trips f32 bit-for-bit", "[core]") {
    std::vector<float> data;
    oracles::Rng rng(11);
    for (int i = 0; i < 2 * 4 * 4; ++i) data.push_back(static_cast<float>(rng.uniform(-5, 5)));
    RawTensor t = RawTensor::of_f32({2, 4, 4}, data);
    auto path = temp_file("roundtrip.cgt");
    write_container(t, path);
    RawTensor back = read_container(path);
    REQUIRE(back.type == dtype::f32);
    REQUIRE(back.shape == t.shape);
    REQUIRE(std::memcmp(back.f32.data(), t.f32.data(), data.size() * sizeof(float)) == 0);
}

TEST_CASE("container round-trips u8 and rejects bad labels", "[core]") {
    std::vector<std::uint8_t> data(3 * 8 * 8, 2);
    data[5] = 7;  // out of label range but a legal u8 payload
    RawTensor t = RawTensor::of_u8({3, 8, 8}, data);
    auto path = temp_file("labels.cgt");
    write_container(t, path);
    RawTensor back = read_container(path);
    REQUIRE(back.u8 == data);
    REQUIRE_THROWS_AS(masks_from_tensor(back), validation_error);
    back.u8[5] = 5;
    REQUIRE_NOTHROW(masks_from_tensor(back));
}

TEST_CASE("container write is deterministic and sized as header plus payload", "[core]") {
    RawTensor t = RawTensor::of_f32({1, 8, 8}, std::vector<float>(64, 0.0f));
    auto p1 = temp_file("det1.cgt"), p2 = temp_file("det2.cgt");
    write_container(t, p1);
    write_container(t, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::vector<char> b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::vector<char> b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(b1 == b2);
    // magic + header length + header + 64 * 4 payload bytes
    std::size_t header = b1.size() - 256;
    REQUIRE(header > 8);
    REQUIRE(b1.size() == header + 64 * sizeof(float));
}

TEST_CASE("container error taxonomy", "[core]") {
    auto path = temp_file("broken.cgt");

    SECTION("bad magic") {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE12345678";
        out.close();
        try {
            read_container(path);
            FAIL("expected container_error");
        } catch (const container_error& e) {
            REQUIRE(e.error_code() == container_error::code::bad_magic);
        }
    }

    SECTION("truncated payload") {
        RawTensor t = RawTensor::of_f32({100}, std::vector<float>(100, 1.0f));
        write_container(t, path);
        auto size = fs::file_size(path);
        fs::resize_file(path, size - 4);  // drop one element
        try {
            read_container(path);
            FAIL("expected container_error");
        } catch (const container_error& e) {
            REQUIRE(e.error_code() == container_error::code::truncated_payload);
        }
    }

    SECTION("dtype mismatch") {
        std::ofstream out(path, std::ios::binary);
        std::string header = R"({"dtype":"f64","shape":[1],"layout":"row-major","endian":"little"})";
        std::uint32_t len = static_cast<std::uint32_t>(header.size());
        out.write("CGT1", 4);
        out.write(reinterpret_cast<const char*>(&len), 4);
        out << header;
        out.write("\0\0\0\0\0\0\0\0", 8);
        out.close();
        try {
            read_container(path);
            FAIL("expected container_error");
        } catch (const container_error& e) {
            REQUIRE(e.error_code() == container_error::code::dtype_mismatch);
        }
    }

    SECTION("payload longer than shape") {
        RawTensor t = RawTensor::of_u8({4}, std::vector<std::uint8_t>(4, 1));
        write_container(t, path);
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out << "x";
        out.close();
        try {
            read_container(path);
            FAIL("expected container_error");
        } catch (const container_error& e) {
            REQUIRE(e.error_code() == container_error::code::shape_mismatch);
        }
    }
}

TEST_CASE("write_container rejects non-finite floats", "[core]") {
    std::vector<float> data(4, 1.0f);
    data[2] = std::numeric_limits<float>::quiet_NaN();
    RawTensor t = RawTensor::of_f32({4}, data);
    REQUIRE_THROWS_AS(write_container(t, temp_file("nan.cgt")), numeric_error);
}

TEST_CASE("normalize_sequence maps min to 0 and max to 1", "[core]") {
    ImageStack raw(2, Image(8, 8, 4.0));
    raw[0](0, 0) = 2.0;
    raw[1](3, 3) = 6.0;
    ImageStack out = normalize_sequence(raw);
    REQUIRE(out[0](0, 0) == 0.0);
    REQUIRE(out[1](3, 3) == 1.0);
    REQUIRE(out[0](1, 1) == Catch::Approx(0.5));

    SECTION("already normalized data is unchanged") {
        oracles::Rng rng(3);
        ImageStack stack(3, Image(8, 8));
        for (auto& f : stack)
            for (auto& v : f) v = rng.uniform();
        // pin the extremes
        stack[0](0, 0) = 0.0;
        stack[2](7, 7) = 1.0;
        ImageStack norm = normalize_sequence(stack);
        for (int n = 0; n < 3; ++n)
            for (std::size_t i = 0; i < norm[n].size(); ++i)
                REQUIRE(norm[n][i] == Catch::Approx(stack[n][i]).margin(1e-7));
    }

    SECTION("constant stack is rejected") {
        ImageStack flat(2, Image(8, 8, 0.7));
        REQUIRE_THROWS_AS(normalize_sequence(flat), validation_error);
    }
}

TEST_CASE("type constructors reject corrupt inputs", "[core]") {
    oracles::Rng rng(17);

    SECTION("CineSequence") {
        ImageStack ok(2, Image(8, 8, 0.5));
        REQUIRE_NOTHROW(CineSequence(ok, {1.0, 1.0}));
        REQUIRE_THROWS_AS(CineSequence(ImageStack(1, Image(8, 8, 0.5)), vec2{1, 1}), validation_error);
        REQUIRE_THROWS_AS(CineSequence(ok, vec2{0.0, 1.0}), validation_error);
        REQUIRE_THROWS_AS(CineSequence(ImageStack(2, Image(4, 8, 0.5)), vec2{1, 1}), validation_error);
        for (int trial = 0; trial < 20; ++trial) {
            ImageStack bad = ok;
            int n = rng.uniform_int(0, 1);
            std::size_t i = static_cast<std::size_t>(rng.uniform_int(0, 63));
            bad[n][i] = trial % 2 == 0 ? 1.5 : std::numeric_limits<double>::quiet_NaN();
            REQUIRE_THROWS_AS(CineSequence(bad, vec2{1, 1}), validation_error);
        }
    }

    SECTION("DisplacementFieldSet") {
        FieldStack ok(2, zero_field(8, 8));
        REQUIRE_NOTHROW(DisplacementFieldSet(ok));
        for (int trial = 0; trial < 20; ++trial) {
            FieldStack bad = ok;
            bad[rng.uniform_int(0, 1)][static_cast<std::size_t>(rng.uniform_int(0, 63))].x =
                std::numeric_limits<double>::infinity();
            REQUIRE_THROWS_AS(DisplacementFieldSet(bad), validation_error);
        }
    }

    SECTION("LabelMaskSet") {
        LabelStack ok(2, LabelImage(8, 8, 1));
        REQUIRE_NOTHROW(LabelMaskSet(ok));
        for (int trial = 0; trial < 20; ++trial) {
            LabelStack bad = ok;
            bad[rng.uniform_int(0, 1)][static_cast<std::size_t>(rng.uniform_int(0, 63))] =
                static_cast<std::uint8_t>(rng.uniform_int(6, 250));
            REQUIRE_THROWS_AS(LabelMaskSet(bad), validation_error);
        }
    }

    SECTION("ProbabilityMaskSet channel sums") {
        std::vector<std::vector<Image>> probs(1, std::vector<Image>(6, Image(8, 8, 0.0)));
        for (auto& v : probs[0][0]) v = 1.0;
        REQUIRE_NOTHROW(ProbabilityMaskSet(probs));
        probs[0][3](2, 2) = 0.1;  // sum now 1.1 at one pixel
        REQUIRE_THROWS_AS(ProbabilityMaskSet(probs), validation_error);
    }

    SECTION("RegistrationConfig") {
        RegistrationConfig cfg;
        REQUIRE_NOTHROW(cfg.validate());
        REQUIRE(cfg.lambda0 == 0.8);
        REQUIRE(cfg.lambda1 == 0.01);
        REQUIRE(cfg.w0 == 5.0);
        REQUIRE(cfg.w1 == 1.0);
        REQUIRE(cfg.w2 == 1.0);
        REQUIRE(cfg.learning_rate == 1e-4);
        cfg.lncc_window = 8;
        REQUIRE_THROWS_AS(cfg.validate(), validation_error);
        cfg = RegistrationConfig{};
        cfg.lambda0 = -0.1;
        REQUIRE_THROWS_AS(cfg.validate(), validation_error);
    }
}
