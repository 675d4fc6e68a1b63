#include "ipop/vnet/arp.hpp"

#include "ipop/vnet/host_interface.hpp"

#include <algorithm>

namespace ipop::vnet {

std::optional<ArpPacket> parse_arp(ByteView payload)
{
    if (payload.size() < 28) return std::nullopt;
    ByteReader in(payload);
    auto htype = in.u16();
    auto ptype = in.u16();
    auto hlen = in.u8();
    auto plen = in.u8();
    if (htype != 1 || ptype != kEtherTypeIpv4 || hlen != 6 || plen != 4) return std::nullopt;
    ArpPacket arp;
    arp.operation = in.u16();
    auto smac = in.bytes(6);
    std::copy(smac.begin(), smac.end(), arp.sender_mac.octets.begin());
    arp.sender_ip = VirtualIp(in.u32());
    auto tmac = in.bytes(6);
    std::copy(tmac.begin(), tmac.end(), arp.target_mac.octets.begin());
    arp.target_ip = VirtualIp(in.u32());
    return arp;
}

Bytes serialize_arp(const ArpPacket& arp)
{
    ByteWriter out(28);
    out.u16(1);
    out.u16(kEtherTypeIpv4);
    out.u8(6);
    out.u8(4);
    out.u16(arp.operation);
    out.bytes(arp.sender_mac.octets);
    out.u32(arp.sender_ip.value());
    out.bytes(arp.target_mac.octets);
    out.u32(arp.target_ip.value());
    return out.take();
}

std::optional<EthernetFrame> handle_arp(const EthernetFrame& request, const HostInterface& host,
                                        const MacAddress& gateway_mac)
{
    if (request.ethertype != kEtherTypeArp) return std::nullopt;
    auto arp = parse_arp(request.payload);
    if (!arp || arp->operation != kArpRequest || arp->is_gratuitous()) return std::nullopt;

    ArpPacket reply;
    reply.operation = kArpReply;
    reply.sender_mac = gateway_mac;
    reply.sender_ip = arp->target_ip;
    reply.target_mac = arp->sender_mac;
    reply.target_ip = arp->sender_ip;

    EthernetFrame frame;
    frame.dst = host.mac;
    frame.src = gateway_mac;
    frame.ethertype = kEtherTypeArp;
    frame.payload = serialize_arp(reply);
    return frame;
}

} // namespace ipop::vnet
