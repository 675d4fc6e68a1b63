#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ipop {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Thrown by ByteReader when a read runs past the end of the buffer. Codecs
// translate it into their own Truncated error.
class ShortRead : public std::runtime_error {
public:
    ShortRead() : std::runtime_error("short read") {}
};

/// Big-endian serializer appending to an owned buffer.
class ByteWriter {
public:
    ByteWriter() = default;
    explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v)
    {
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        buf_.push_back(static_cast<std::uint8_t>(v));
    }
    void u32(std::uint32_t v)
    {
        u16(static_cast<std::uint16_t>(v >> 16));
        u16(static_cast<std::uint16_t>(v));
    }
    void u64(std::uint64_t v)
    {
        u32(static_cast<std::uint32_t>(v >> 32));
        u32(static_cast<std::uint32_t>(v));
    }
    void bytes(ByteView v) { buf_.insert(buf_.end(), v.begin(), v.end()); }

    std::size_t size() const { return buf_.size(); }
    Bytes& buffer() { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

/// Big-endian cursor over a borrowed buffer.
class ByteReader {
public:
    explicit ByteReader(ByteView data) : data_(data) {}

    std::uint8_t u8()
    {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16()
    {
        need(2);
        auto v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t hi = u16();
        return (hi << 16) | u16();
    }
    std::uint64_t u64()
    {
        need(8);
        std::uint64_t hi = u32();
        return (hi << 32) | u32();
    }
    ByteView bytes(std::size_t n)
    {
        need(n);
        auto v = data_.subspan(pos_, n);
        pos_ += n;
        return v;
    }
    ByteView rest()
    {
        auto v = data_.subspan(pos_);
        pos_ = data_.size();
        return v;
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const
    {
        if (data_.size() - pos_ < n) throw ShortRead();
    }

    ByteView data_;
    std::size_t pos_ = 0;
};

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

} // namespace ipop
