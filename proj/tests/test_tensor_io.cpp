#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "c2f/tensor_io.hpp"

using namespace c2f;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "c2f_test_tensor_io";
    fs::create_directories(dir);
    return dir / name;
}

Errc decode_error(const std::vector<char>& bytes) {
    try {
        decode_tensor(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "decode succeeded";
    return Errc::io_failure;
}

void put_u32(std::vector<char>& b, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[at + i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

}  // namespace

TEST(TensorIo, FileRoundTrip) {
    std::vector<double> data(12);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = 0.25 * static_cast<double>(i) - 1.0;
    const Tensor t({2, 2, 3}, data);
    const auto path = temp_path("rt.fmap");
    write_tensor(path, t, Magic::fmap);
    const auto file = read_tensor(path);
    EXPECT_EQ(file.magic, Magic::fmap);
    EXPECT_EQ(file.tensor, t);
}

TEST(TensorIo, HeaderLayoutIsLittleEndian) {
    const auto bytes = encode_tensor(Tensor({1, 2}, {1.0, -2.0}), Magic::selw);
    ASSERT_EQ(bytes.size(), 12u + 8u + 8u);
    EXPECT_EQ(std::string(bytes.data(), 4), "SELW");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[8], 2);
    EXPECT_EQ(bytes[12], 1);
    EXPECT_EQ(bytes[16], 2);
    float f;
    std::memcpy(&f, bytes.data() + 24, 4);
    EXPECT_EQ(f, -2.0f);
}

TEST(TensorIo, OverwriteReplacesContent) {
    const auto path = temp_path("over.attn");
    write_tensor(path, Tensor::filled({2, 3, 4}, 1.0), Magic::attn);
    write_tensor(path, Tensor::filled({1, 1, 1}, 2.0), Magic::attn);
    EXPECT_EQ(read_tensor(path).tensor, Tensor::filled({1, 1, 1}, 2.0));
    EXPECT_EQ(fs::file_size(path), 12u + 12u + 4u);
}

TEST(TensorIo, BadMagic) {
    auto bytes = encode_tensor(Tensor({1, 1, 1}), Magic::fmap);
    std::memcpy(bytes.data(), "XXXX", 4);
    EXPECT_EQ(decode_error(bytes), Errc::bad_magic);
}

TEST(TensorIo, PayloadOneFloatShort) {
    auto bytes = encode_tensor(Tensor({2, 2, 2}), Magic::fmap);
    bytes.resize(bytes.size() - 4);
    EXPECT_EQ(decode_error(bytes), Errc::truncated);
}

TEST(TensorIo, TruncatedHeaderAndDims) {
    const auto bytes = encode_tensor(Tensor({2, 2, 2}), Magic::fmap);
    EXPECT_EQ(decode_error({bytes.begin(), bytes.begin() + 2}), Errc::truncated);
    EXPECT_EQ(decode_error({bytes.begin(), bytes.begin() + 10}), Errc::truncated);
    EXPECT_EQ(decode_error({bytes.begin(), bytes.begin() + 16}), Errc::truncated);
}

TEST(TensorIo, BadVersion) {
    auto bytes = encode_tensor(Tensor({1, 1, 1}), Magic::fmap);
    put_u32(bytes, 4, 2);
    EXPECT_EQ(decode_error(bytes), Errc::bad_version);
}

TEST(TensorIo, RankMustMatchMagic) {
    auto bytes = encode_tensor(Tensor({2, 2}), Magic::selw);
    std::memcpy(bytes.data(), "FMAP", 4);
    EXPECT_EQ(decode_error(bytes), Errc::magic_dims_mismatch);
    EXPECT_THROW(encode_tensor(Tensor({2, 2}), Magic::fmap), Error);
}

TEST(TensorIo, ZeroDimRejected) {
    auto bytes = encode_tensor(Tensor({1, 1, 1}), Magic::fmap);
    put_u32(bytes, 12, 0);
    EXPECT_EQ(decode_error(bytes), Errc::magic_dims_mismatch);
    EXPECT_THROW(Tensor({0, 2}), Error);
}

TEST(TensorIo, TrailingBytesRejected) {
    auto bytes = encode_tensor(Tensor({1, 1, 1}), Magic::fmap);
    bytes.push_back(0);
    EXPECT_EQ(decode_error(bytes), Errc::dimension_mismatch);
}

TEST(TensorIo, AttnAcceptsFourDims) {
    const Tensor t = Tensor::filled({2, 1, 3, 4}, 0.5);
    EXPECT_EQ(decode_tensor(encode_tensor(t, Magic::attn)).tensor, t);
}

TEST(TensorIo, ReadAsWrongMagic) {
    const auto path = temp_path("wrong.selw");
    write_tensor(path, Tensor({2, 3}), Magic::selw);
    try {
        read_tensor_as(path, Magic::fmap);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::bad_magic);
    }
}

TEST(TensorIo, MissingFileIsIoFailure) {
    try {
        read_tensor(temp_path("does_not_exist.fmap"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::io_failure);
    }
}
