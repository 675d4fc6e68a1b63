#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/vnet/addresses.hpp"

#include <cstdint>

namespace ipop::vnet {

inline constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
inline constexpr std::uint16_t kEtherTypeArp = 0x0806;
inline constexpr std::uint16_t kEtherTypeRarp = 0x8035;
inline constexpr std::size_t kEthernetHeaderSize = 14;

/// Ethernet II frame as read from or written to the host interface.
struct EthernetFrame {
    MacAddress dst;
    MacAddress src;
    std::uint16_t ethertype = kEtherTypeIpv4;
    Bytes payload;

    bool operator==(const EthernetFrame&) const = default;
};

EthernetFrame parse_ethernet(ByteView bytes); // Truncated below 14 bytes
Bytes serialize_ethernet(const EthernetFrame& frame);

} // namespace ipop::vnet
