#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/vnet/addresses.hpp"
#include "ipop/vnet/ethernet.hpp"

#include <cstdint>
#include <optional>

namespace ipop::vnet {

struct HostInterface;

inline constexpr std::uint16_t kArpRequest = 1;
inline constexpr std::uint16_t kArpReply = 2;

// Ethernet/IPv4 ARP body (28 bytes).
struct ArpPacket {
    std::uint16_t operation = kArpRequest;
    MacAddress sender_mac;
    VirtualIp sender_ip;
    MacAddress target_mac;
    VirtualIp target_ip;

    bool is_gratuitous() const { return sender_ip == target_ip; }
};

std::optional<ArpPacket> parse_arp(ByteView payload);
Bytes serialize_arp(const ArpPacket& arp);

/// Answers an ARP request from the local host. Every queried IPv4 address,
/// the gateway's included, resolves to the gateway MAC, so the host hands
/// all virtual-subnet traffic to IPOP as IP frames and ARP never leaves the
/// host. Replies, gratuitous announcements and non-ARP frames yield nothing.
std::optional<EthernetFrame> handle_arp(const EthernetFrame& request, const HostInterface& host,
                                        const MacAddress& gateway_mac = kGatewayMac);

} // namespace ipop::vnet
