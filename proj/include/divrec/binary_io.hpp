#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divrec/error.hpp"

// Little-endian encode/decode helpers shared by the WAV, feature-cache and
// model formats.
namespace divrec::bin {

class Writer {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { put(v); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void i16(std::int16_t v) { put(static_cast<std::uint16_t>(v)); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }

    const std::string& data() const noexcept { return buf_; }
    std::string& data() noexcept { return buf_; }

private:
    template <typename U>
    void put(U v)
    {
        for (std::size_t i = 0; i < sizeof(U); ++i)
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }

    std::string buf_;
};

class Reader {
public:
    Reader(std::string_view data, ErrorCode on_short) : data_(data), on_short_(on_short) {}

    std::string_view bytes(std::size_t n)
    {
        need(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
    std::uint16_t u16() { return get<std::uint16_t>(); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    std::int16_t i16() { return static_cast<std::int16_t>(get<std::uint16_t>()); }
    double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    void skip(std::size_t n) { bytes(n); }

private:
    void need(std::size_t n) const
    {
        if (remaining() < n)
            throw Error(on_short_, "unexpected end of data at offset " + std::to_string(pos_));
    }

    template <typename U>
    U get()
    {
        auto raw = bytes(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<std::uint8_t>(raw[i])) << (8 * i);
        return v;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
    ErrorCode on_short_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

} // namespace divrec::bin
