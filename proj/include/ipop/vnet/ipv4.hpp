#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/vnet/addresses.hpp"

#include <cstdint>

namespace ipop::vnet {

inline constexpr std::size_t kIpv4MinHeader = 20;
inline constexpr std::uint8_t kProtoIcmp = 1;
inline constexpr std::uint8_t kProtoBulk = 253; // experimental range, used by the bulk workload

struct Ipv4Packet {
    std::uint8_t version = 4;
    std::uint8_t ihl = 5;
    std::uint8_t tos = 0;
    std::uint16_t total_length = 0;
    std::uint16_t identification = 0;
    std::uint16_t flags_fragment = 0;
    std::uint8_t ttl = 64;
    std::uint8_t protocol = 0;
    std::uint16_t header_checksum = 0;
    VirtualIp src;
    VirtualIp dst;
    Bytes options;
    Bytes payload;

    std::size_t header_length() const { return std::size_t{ihl} * 4; }

    // A consistent packet: ihl, total_length and checksum derived from the
    // other fields.
    static Ipv4Packet make(VirtualIp src, VirtualIp dst, std::uint8_t protocol, Bytes payload,
                           std::uint16_t identification = 0, std::uint8_t ttl = 64);

    bool operator==(const Ipv4Packet&) const = default;
};

/// One's-complement of the one's-complement sum of the 16-bit big-endian
/// words. Throws OddLength on odd input.
std::uint16_t ipv4_checksum(ByteView header);

/// Same sum, padding an odd trailing byte with zero (ICMP bodies).
std::uint16_t internet_checksum(ByteView data);

// Validates version, ihl, length consistency and checksum, in that order.
// Bytes past total_length (link-layer padding) are ignored.
Ipv4Packet parse_ipv4(ByteView bytes);

// Recomputes ihl, total_length and header_checksum.
Bytes serialize_ipv4(const Ipv4Packet& packet);

} // namespace ipop::vnet
