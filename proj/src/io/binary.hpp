#pragma once

// Little-endian byte helpers shared by the binary formats.

#include "seld/core.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace seld::io::detail {

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t position() const { return pos_; }

    std::string_view take(std::size_t n, const char* what) {
        if (remaining() < n) {
            throw Error(std::string("truncated input while reading ") + what);
        }
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    void skip(std::size_t n, const char* what) { take(n, what); }

    template <typename T>
    T read(const char* what) {
        auto raw = take(sizeof(T), what);
        std::make_unsigned_t<T> v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(raw[i])) << (8 * i);
        }
        return static_cast<T>(v);
    }

    float read_f32(const char* what) { return std::bit_cast<float>(read<std::uint32_t>(what)); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

template <typename T>
void put(std::string& out, T value) {
    auto v = static_cast<std::make_unsigned_t<T>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

inline void put_f32(std::string& out, float value) { put(out, std::bit_cast<std::uint32_t>(value)); }

}  // namespace seld::io::detail
