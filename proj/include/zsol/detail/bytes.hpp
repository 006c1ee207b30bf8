#pragma once

// Little-endian byte encoding shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "zsol/errors.hpp"

namespace zsol::detail {

class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v & 0xffu));
        u8(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffu));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    void expect_magic(std::string_view magic) {
        if (take(magic.size()) != magic) fail("bad magic, expected '" + std::string(magic) + "'");
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() {
        auto s = take(2);
        return static_cast<std::uint16_t>(static_cast<std::uint8_t>(s[0]) |
                                          (static_cast<std::uint8_t>(s[1]) << 8));
    }
    std::uint32_t u32() {
        auto s = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[i])) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }

    std::size_t remaining() const { return data_.size() - pos_; }
    void expect_end() {
        if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw DataError(what_ + ": " + msg);
    }

private:
    std::string_view take(std::size_t n) {
        if (remaining() < n) fail("truncated data");
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
    std::string what_;
};

/// Whole-file read; DataError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace zsol::detail
