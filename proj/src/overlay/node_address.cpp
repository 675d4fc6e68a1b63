#include "ipop/overlay/node_address.hpp"

#include "ipop/common/random.hpp"

#include <cmath>
#include <stdexcept>

namespace ipop::overlay {

NodeAddress NodeAddress::from_bytes(ByteView bytes)
{
    if (bytes.size() != kBytes) throw std::invalid_argument("node address must be 20 bytes");
    NodeAddress a;
    for (std::size_t i = 0; i < 5; ++i) {
        a.limbs_[i] = (std::uint32_t{bytes[4 * i]} << 24) | (std::uint32_t{bytes[4 * i + 1]} << 16) |
                      (std::uint32_t{bytes[4 * i + 2]} << 8) | bytes[4 * i + 3];
    }
    return a;
}

std::optional<NodeAddress> NodeAddress::from_hex(std::string_view hex)
{
    if (hex.size() != 2 * kBytes) return std::nullopt;
    try {
        auto raw = ipop::from_hex(hex);
        return from_bytes(raw);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

NodeAddress NodeAddress::from_u64(std::uint64_t low)
{
    NodeAddress a;
    a.limbs_[3] = static_cast<std::uint32_t>(low >> 32);
    a.limbs_[4] = static_cast<std::uint32_t>(low);
    return a;
}

NodeAddress NodeAddress::power_of_two(unsigned bit)
{
    NodeAddress a;
    if (bit >= kBits) return a;
    a.limbs_[4 - bit / 32] = std::uint32_t{1} << (bit % 32);
    return a;
}

NodeAddress NodeAddress::from_log2(double x)
{
    if (!(x >= 0.0)) return from_u64(1);
    if (x >= kBits) x = std::nextafter(static_cast<double>(kBits), 0.0);
    auto whole = static_cast<unsigned>(std::floor(x));
    if (whole < 53) return from_u64(static_cast<std::uint64_t>(std::exp2(x)));
    // mantissa in [2^52, 2^53) scaled into place
    auto mantissa = static_cast<std::uint64_t>(std::exp2(x - whole + 52.0));
    return from_u64(mantissa).shifted_left(whole - 52);
}

NodeAddress NodeAddress::random(Rng& rng)
{
    NodeAddress a;
    for (auto& limb : a.limbs_) limb = static_cast<std::uint32_t>(rng.next() >> 32);
    return a;
}

std::array<std::uint8_t, NodeAddress::kBytes> NodeAddress::to_bytes() const
{
    std::array<std::uint8_t, kBytes> out{};
    for (std::size_t i = 0; i < 5; ++i) {
        out[4 * i] = static_cast<std::uint8_t>(limbs_[i] >> 24);
        out[4 * i + 1] = static_cast<std::uint8_t>(limbs_[i] >> 16);
        out[4 * i + 2] = static_cast<std::uint8_t>(limbs_[i] >> 8);
        out[4 * i + 3] = static_cast<std::uint8_t>(limbs_[i]);
    }
    return out;
}

std::string NodeAddress::to_hex() const
{
    auto b = to_bytes();
    return ipop::to_hex(b);
}

bool NodeAddress::is_zero() const
{
    for (auto l : limbs_)
        if (l != 0) return false;
    return true;
}

double NodeAddress::to_double() const
{
    double v = 0.0;
    for (auto l : limbs_) v = v * 4294967296.0 + static_cast<double>(l);
    return v;
}

NodeAddress NodeAddress::shifted_left(unsigned bits) const
{
    if (bits >= kBits) return NodeAddress{};
    NodeAddress out;
    unsigned limb_shift = bits / 32;
    unsigned bit_shift = bits % 32;
    for (std::size_t i = 0; i < 5; ++i) {
        std::size_t src = i + limb_shift;
        if (src >= 5) break;
        std::uint64_t v = std::uint64_t{limbs_[src]} << bit_shift;
        if (bit_shift != 0 && src + 1 < 5) v |= limbs_[src + 1] >> (32 - bit_shift);
        out.limbs_[i] = static_cast<std::uint32_t>(v);
    }
    return out;
}

NodeAddress NodeAddress::operator+(const NodeAddress& other) const
{
    NodeAddress out;
    std::uint64_t carry = 0;
    for (int i = 4; i >= 0; --i) {
        std::uint64_t sum = std::uint64_t{limbs_[i]} + other.limbs_[i] + carry;
        out.limbs_[i] = static_cast<std::uint32_t>(sum);
        carry = sum >> 32;
    }
    return out;
}

NodeAddress NodeAddress::operator-(const NodeAddress& other) const
{
    NodeAddress out;
    std::int64_t borrow = 0;
    for (int i = 4; i >= 0; --i) {
        std::int64_t diff = std::int64_t{limbs_[i]} - other.limbs_[i] - borrow;
        borrow = diff < 0 ? 1 : 0;
        out.limbs_[i] = static_cast<std::uint32_t>(diff + (borrow << 32));
    }
    return out;
}

NodeAddress clockwise_distance(const NodeAddress& from, const NodeAddress& to) { return to - from; }

NodeAddress ring_distance(const NodeAddress& a, const NodeAddress& b)
{
    auto forward = b - a;
    auto backward = a - b;
    return forward < backward ? forward : backward;
}

} // namespace ipop::overlay
