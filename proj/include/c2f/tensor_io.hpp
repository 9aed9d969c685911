#pragma once

// Binary tensor file:
//
//   offset  size        field
//   0       4           magic, ASCII: "FMAP" | "ATTN" | "SELW"
//   4       4           version, u32 little-endian, always 1
//   8       4           ndims, u32 little-endian
//   12      4*ndims     dims, u32 little-endian each
//   ...     4*prod(dims) payload, IEEE-754 binary32 little-endian, row-major
//
// No padding, no trailing bytes. Values widen to double on load.
//
// Shape conventions per magic:
//   FMAP  3 dims  H, W, C
//   ATTN  3 dims  h, T, N   (or Q/K dumps h, T, d / h, N, d)
//         4 dims  L, h, T, N (layer-major stack of attention maps)
//   SELW  2 dims  S, Ng+1   (selector weight with the bias in the last column)

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "c2f/error.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

enum class Magic { fmap, attn, selw };

inline constexpr std::uint32_t kTensorFileVersion = 1;

inline std::string_view magic_tag(Magic m) {
    switch (m) {
        case Magic::fmap: return "FMAP";
        case Magic::attn: return "ATTN";
        case Magic::selw: return "SELW";
    }
    return "????";
}

inline bool magic_accepts_rank(Magic m, std::size_t rank) {
    switch (m) {
        case Magic::fmap: return rank == 3;
        case Magic::attn: return rank == 3 || rank == 4;
        case Magic::selw: return rank == 2;
    }
    return false;
}

struct TensorFile {
    Magic magic;
    Tensor tensor;
};

namespace detail {

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

/// Serializes a tensor to the binary layout above.
inline std::vector<char> encode_tensor(const Tensor& t, Magic magic) {
    detail::require(!t.empty() && t.rank() > 0, Errc::invalid_argument, "cannot encode an empty tensor");
    detail::require(magic_accepts_rank(magic, t.rank()), Errc::magic_dims_mismatch,
                    std::string(magic_tag(magic)) + " does not accept shape " + t.shape_string());
    std::vector<char> out;
    out.reserve(12 + 4 * t.rank() + 4 * t.size());
    const auto tag = magic_tag(magic);
    out.insert(out.end(), tag.begin(), tag.end());
    detail::put_u32(out, kTensorFileVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.dims()) {
        detail::require(d <= std::numeric_limits<std::uint32_t>::max(), Errc::invalid_argument, "dimension too large");
        detail::put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (double v : t.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

/// Parses the binary layout. Each malformation has its own error code.
inline TensorFile decode_tensor(std::span<const char> bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    detail::require(bytes.size() >= 4, Errc::truncated, "tensor file shorter than its magic");
    Magic magic;
    const std::string_view tag(bytes.data(), 4);
    if (tag == "FMAP")
        magic = Magic::fmap;
    else if (tag == "ATTN")
        magic = Magic::attn;
    else if (tag == "SELW")
        magic = Magic::selw;
    else
        throw Error(Errc::bad_magic, "unknown tensor file magic");

    detail::require(bytes.size() >= 12, Errc::truncated, "tensor file header truncated");
    const std::uint32_t version = detail::get_u32(p + 4);
    detail::require(version == kTensorFileVersion, Errc::bad_version,
                    "unsupported tensor file version " + std::to_string(version));
    const std::uint32_t ndims = detail::get_u32(p + 8);
    detail::require(magic_accepts_rank(magic, ndims), Errc::magic_dims_mismatch,
                    std::string(tag) + " file with " + std::to_string(ndims) + " dims");
    detail::require(bytes.size() >= 12 + 4 * std::size_t{ndims}, Errc::truncated, "tensor file dims truncated");

    std::vector<std::size_t> dims(ndims);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < ndims; ++i) {
        dims[i] = detail::get_u32(p + 12 + 4 * i);
        detail::require(dims[i] > 0, Errc::magic_dims_mismatch, "tensor file has a zero dimension");
        detail::require(count <= (std::numeric_limits<std::size_t>::max() / 4) / dims[i], Errc::magic_dims_mismatch,
                        "tensor file dims overflow");
        count *= dims[i];
    }
    const std::size_t offset = 12 + 4 * std::size_t{ndims};
    const std::size_t remaining = bytes.size() - offset;
    detail::require(remaining >= 4 * count, Errc::truncated,
                    "tensor payload truncated: expected " + std::to_string(4 * count) + " bytes, found " +
                        std::to_string(remaining));
    detail::require(remaining == 4 * count, Errc::dimension_mismatch,
                    "tensor payload has " + std::to_string(remaining - 4 * count) + " trailing bytes");

    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i)
        data[i] = static_cast<double>(std::bit_cast<float>(detail::get_u32(p + offset + 4 * i)));
    return {magic, Tensor(std::move(dims), std::move(data))};
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t, Magic magic) {
    const auto bytes = encode_tensor(t, magic);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    detail::require(static_cast<bool>(os), Errc::io_failure, "cannot open " + path.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    detail::require(static_cast<bool>(os), Errc::io_failure, "write failed: " + path.string());
}

inline TensorFile read_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    detail::require(static_cast<bool>(is), Errc::io_failure, "cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    detail::require(!is.bad(), Errc::io_failure, "read failed: " + path.string());
    return decode_tensor(bytes);
}

/// Reads a file and checks that it carries the expected magic.
inline Tensor read_tensor_as(const std::filesystem::path& path, Magic expected) {
    auto file = read_tensor(path);
    detail::require(file.magic == expected, Errc::bad_magic,
                    path.string() + ": expected " + std::string(magic_tag(expected)) + ", found " +
                        std::string(magic_tag(file.magic)));
    return std::move(file.tensor);
}

}  // namespace c2f
