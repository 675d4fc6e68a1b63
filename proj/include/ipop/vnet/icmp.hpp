#pragma once

#include "ipop/common/bytes.hpp"

#include <cstdint>
#include <optional>

namespace ipop::vnet {

inline constexpr std::uint8_t kIcmpEchoReply = 0;
inline constexpr std::uint8_t kIcmpEchoRequest = 8;

// Just enough ICMP for echo bookkeeping: the 8-byte echo header and data.
struct IcmpEcho {
    std::uint8_t type = kIcmpEchoRequest;
    std::uint8_t code = 0;
    std::uint16_t id = 0;
    std::uint16_t seq = 0;
    Bytes data;
};

Bytes serialize_icmp_echo(const IcmpEcho& echo);
// nullopt if too short, not an echo type, or the checksum fails.
std::optional<IcmpEcho> parse_icmp_echo(ByteView bytes);

} // namespace ipop::vnet
