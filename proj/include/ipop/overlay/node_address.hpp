#pragma once

#include "ipop/common/bytes.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ipop {
class Rng;
}

namespace ipop::overlay {

/// A 160-bit identifier on the overlay ring. Arithmetic wraps modulo 2^160.
class NodeAddress {
public:
    static constexpr std::size_t kBytes = 20;
    static constexpr unsigned kBits = 160;

    constexpr NodeAddress() = default;

    static NodeAddress from_bytes(ByteView bytes); // exactly 20 bytes, big-endian
    static std::optional<NodeAddress> from_hex(std::string_view hex);
    static NodeAddress from_u64(std::uint64_t low);
    static NodeAddress power_of_two(unsigned bit);
    // floor(2^x) for 0 <= x < 160; precision is that of a double mantissa.
    static NodeAddress from_log2(double x);
    static NodeAddress random(Rng& rng);

    std::array<std::uint8_t, kBytes> to_bytes() const;
    std::string to_hex() const; // 40 lowercase hex digits
    std::string short_hex() const { return to_hex().substr(0, 8); }

    bool is_zero() const;
    // Approximate magnitude, good enough for size estimates.
    double to_double() const;
    NodeAddress shifted_left(unsigned bits) const;

    NodeAddress operator+(const NodeAddress& other) const;
    NodeAddress operator-(const NodeAddress& other) const;

    constexpr auto operator<=>(const NodeAddress&) const = default;

private:
    // limbs_[0] holds the most significant 32 bits, so the defaulted
    // lexicographic comparison is the numeric order.
    std::array<std::uint32_t, 5> limbs_{};
};

/// (to - from) mod 2^160: distance walking the ring in the increasing direction.
NodeAddress clockwise_distance(const NodeAddress& from, const NodeAddress& to);

/// Minimal-arc distance: min of the two directed distances.
NodeAddress ring_distance(const NodeAddress& a, const NodeAddress& b);

} // namespace ipop::overlay
