#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cinegroup/core/errors.hpp"

namespace cinegroup {

// Tensor container: magic "CGT1", u32 little-endian header length, UTF-8 JSON
// header {"dtype","shape","layout","endian"}, then the raw row-major
// little-endian payload.

enum class dtype { f32, u8 };

inline const char* dtype_name(dtype d) { return d == dtype::f32 ? "f32" : "u8"; }

struct RawTensor {
    dtype type = dtype::f32;
    std::vector<std::int64_t> shape;
    std::vector<float> f32;
    std::vector<std::uint8_t> u8;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : shape) n *= static_cast<std::size_t>(d);
        return shape.empty() ? 0 : n;
    }

    static RawTensor of_f32(std::vector<std::int64_t> shape, std::vector<float> data) {
        RawTensor t;
        t.type = dtype::f32;
        t.shape = std::move(shape);
        t.f32 = std::move(data);
        if (t.f32.size() != t.element_count())
            throw validation_error("RawTensor: payload size does not match shape");
        return t;
    }

    static RawTensor of_u8(std::vector<std::int64_t> shape, std::vector<std::uint8_t> data) {
        RawTensor t;
        t.type = dtype::u8;
        t.shape = std::move(shape);
        t.u8 = std::move(data);
        if (t.u8.size() != t.element_count())
            throw validation_error("RawTensor: payload size does not match shape");
        return t;
    }
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

inline constexpr char kMagic[4] = {'C', 'G', 'T', '1'};

inline std::string make_header(const RawTensor& t) {
    // Hand-assembled so identical tensors serialize byte-identically.
    std::ostringstream os;
    os << "{\"dtype\":\"" << dtype_name(t.type) << "\",\"shape\":[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) os << ',';
        os << t.shape[i];
    }
    os << "],\"layout\":\"row-major\",\"endian\":\"little\"}";
    return os.str();
}

}  // namespace detail

inline void write_container(const RawTensor& tensor, const std::filesystem::path& path) {
    if (tensor.type == dtype::f32) {
        for (float v : tensor.f32)
            if (!std::isfinite(v))
                throw numeric_error("write_container: non-finite value in f32 payload");
    }
    std::string header = detail::make_header(tensor);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("write_container: cannot open " + path.string());
    out.write(detail::kMagic, 4);
    std::uint32_t hlen = static_cast<std::uint32_t>(header.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    if (tensor.type == dtype::f32)
        out.write(reinterpret_cast<const char*>(tensor.f32.data()),
                  static_cast<std::streamsize>(tensor.f32.size() * sizeof(float)));
    else
        out.write(reinterpret_cast<const char*>(tensor.u8.data()),
                  static_cast<std::streamsize>(tensor.u8.size()));
    if (!out) throw io_error("write_container: write failed for " + path.string());
}

inline RawTensor read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("read_container: cannot open " + path.string());

    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, detail::kMagic, 4) != 0)
        throw container_error(container_error::code::bad_magic,
                              "read_container: bad magic in " + path.string());

    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    if (in.gcount() != 4)
        throw container_error(container_error::code::bad_header,
                              "read_container: missing header length in " + path.string());

    std::string header(hlen, '\0');
    in.read(header.data(), hlen);
    if (static_cast<std::uint32_t>(in.gcount()) != hlen)
        throw container_error(container_error::code::bad_header,
                              "read_container: truncated header in " + path.string());

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw container_error(container_error::code::bad_header,
                              std::string("read_container: header is not valid JSON: ") + e.what());
    }
    if (!j.contains("dtype") || !j.contains("shape"))
        throw container_error(container_error::code::bad_header,
                              "read_container: header missing dtype/shape");
    if (j.value("layout", "row-major") != "row-major" || j.value("endian", "little") != "little")
        throw container_error(container_error::code::bad_header,
                              "read_container: unsupported layout or endianness");

    RawTensor t;
    std::string dt = j["dtype"].get<std::string>();
    if (dt == "f32")
        t.type = dtype::f32;
    else if (dt == "u8")
        t.type = dtype::u8;
    else
        throw container_error(container_error::code::dtype_mismatch,
                              "read_container: unknown dtype '" + dt + "'");

    for (const auto& d : j["shape"]) {
        std::int64_t v = d.get<std::int64_t>();
        if (v <= 0)
            throw container_error(container_error::code::shape_mismatch,
                                  "read_container: non-positive dimension in shape");
        t.shape.push_back(v);
    }

    std::size_t n = t.element_count();
    std::size_t elem = t.type == dtype::f32 ? sizeof(float) : 1;
    std::size_t want = n * elem;

    std::vector<char> payload(want);
    in.read(payload.data(), static_cast<std::streamsize>(want));
    if (static_cast<std::size_t>(in.gcount()) != want)
        throw container_error(container_error::code::truncated_payload,
                              "read_container: payload shorter than declared shape in " + path.string());
    // Anything left over past the declared payload is a length inconsistency.
    char extra;
    if (in.read(&extra, 1); in.gcount() != 0)
        throw container_error(container_error::code::shape_mismatch,
                              "read_container: payload longer than declared shape in " + path.string());

    if (t.type == dtype::f32) {
        t.f32.resize(n);
        std::memcpy(t.f32.data(), payload.data(), want);
    } else {
        t.u8.assign(payload.begin(), payload.end());
    }
    return t;
}

}  // namespace cinegroup
