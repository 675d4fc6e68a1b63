#pragma once

#include "ipop/overlay/node_address.hpp"
#include "ipop/transport/brunet_packet.hpp"
#include "ipop/vnet/ipv4.hpp"

namespace ipop::vnet {

inline constexpr std::size_t kDefaultPayloadMtu = 1400;

/// Wraps a serialized IPv4 packet in an IP-tunnel envelope with a fresh
/// header (ttl 64, hops 0). Oversize if the IP packet exceeds payload_mtu.
transport::BrunetPacket encapsulate(const Ipv4Packet& packet, const overlay::NodeAddress& src,
                                    const overlay::NodeAddress& dst, std::size_t payload_mtu = kDefaultPayloadMtu);

/// Inverse of encapsulate. WrongType for non-tunnel envelopes, otherwise
/// any parse_ipv4 error.
Ipv4Packet decapsulate(const transport::BrunetPacket& pkt);

} // namespace ipop::vnet
