#include "ipop/vnet/host_stack.hpp"

#include "ipop/vnet/arp.hpp"
#include "ipop/vnet/ethernet.hpp"
#include "ipop/vnet/icmp.hpp"
#include "ipop/vnet/packet_error.hpp"

namespace ipop::vnet {

HostStack::HostStack(HostInterface& iface, Subnet subnet) : iface_(iface), subnet_(subnet) {}

void HostStack::ping(VirtualIp dst, std::uint16_t seq, TimePoint now)
{
    if (dst == iface_.ip) {
        if (on_echo_reply) on_echo_reply(EchoReply{dst, echo_id(), seq, now});
        return;
    }
    IcmpEcho echo;
    echo.type = kIcmpEchoRequest;
    echo.id = echo_id();
    echo.seq = seq;
    echo.data.resize(kEchoDataSize);
    for (std::size_t i = 0; i < kEchoDataSize; ++i) echo.data[i] = static_cast<std::uint8_t>(i);
    send_ip(dst, kProtoIcmp, serialize_icmp_echo(echo), now);
}

void HostStack::send_bulk(VirtualIp dst, Bytes chunk, TimePoint now)
{
    if (dst == iface_.ip) {
        if (on_bulk) on_bulk(dst, chunk.size(), now);
        return;
    }
    send_ip(dst, kProtoBulk, std::move(chunk), now);
}

void HostStack::send_ip(VirtualIp dst, std::uint8_t protocol, Bytes payload, TimePoint now)
{
    transmit(Ipv4Packet::make(iface_.ip, dst, protocol, std::move(payload), next_ident_++), now);
}

VirtualIp HostStack::next_hop_ip(VirtualIp dst) const { return subnet_.contains(dst) ? dst : subnet_.gateway(); }

void HostStack::transmit(Ipv4Packet packet, TimePoint)
{
    auto hop = next_hop_ip(packet.dst);
    auto cached = arp_cache_.find(hop);
    if (cached != arp_cache_.end()) {
        emit_frame(cached->second, kEtherTypeIpv4, serialize_ipv4(packet));
        return;
    }
    auto& queue = awaiting_arp_[hop];
    queue.push_back(std::move(packet));
    if (queue.size() > 1) return; // request already outstanding

    ArpPacket req;
    req.operation = kArpRequest;
    req.sender_mac = iface_.mac;
    req.sender_ip = iface_.ip;
    req.target_ip = hop;
    ++counters_.arp_requests;
    emit_frame(MacAddress::broadcast(), kEtherTypeArp, serialize_arp(req));
}

void HostStack::emit_frame(const MacAddress& dst, std::uint16_t ethertype, Bytes payload)
{
    EthernetFrame f;
    f.dst = dst;
    f.src = iface_.mac;
    f.ethertype = ethertype;
    f.payload = std::move(payload);
    ++counters_.frames_out;
    iface_.from_host.push_back(serialize_ethernet(f));
}

void HostStack::process_inbound(TimePoint now)
{
    while (!iface_.to_host.empty()) {
        Bytes raw = std::move(iface_.to_host.front());
        iface_.to_host.pop_front();
        ++counters_.frames_in;

        EthernetFrame frame;
        try {
            frame = parse_ethernet(raw);
        } catch (const PacketError&) {
            continue;
        }
        if (frame.dst != iface_.mac || frame.src != kGatewayMac) ++counters_.bad_framing;

        if (frame.ethertype == kEtherTypeArp) {
            auto arp = parse_arp(frame.payload);
            if (!arp || arp->operation != kArpReply) continue;
            arp_cache_[arp->sender_ip] = arp->sender_mac;
            auto pending = awaiting_arp_.find(arp->sender_ip);
            if (pending == awaiting_arp_.end()) continue;
            auto packets = std::move(pending->second);
            awaiting_arp_.erase(pending);
            for (auto& p : packets) emit_frame(arp->sender_mac, kEtherTypeIpv4, serialize_ipv4(p));
            continue;
        }
        if (frame.ethertype != kEtherTypeIpv4) continue;
        try {
            handle_ip(parse_ipv4(frame.payload), now);
        } catch (const PacketError&) {
            ++counters_.bad_checksum;
        }
    }
}

void HostStack::handle_ip(const Ipv4Packet& packet, TimePoint now)
{
    if (packet.dst != iface_.ip) return;
    if (packet.protocol == kProtoIcmp) {
        auto echo = parse_icmp_echo(packet.payload);
        if (!echo) return;
        if (echo->type == kIcmpEchoRequest) {
            IcmpEcho reply = *echo;
            reply.type = kIcmpEchoReply;
            ++counters_.echo_requests_answered;
            send_ip(packet.src, kProtoIcmp, serialize_icmp_echo(reply), now);
        } else if (on_echo_reply) {
            on_echo_reply(EchoReply{packet.src, echo->id, echo->seq, now});
        }
        return;
    }
    if (packet.protocol == kProtoBulk && on_bulk) on_bulk(packet.src, packet.payload.size(), now);
}

} // namespace ipop::vnet
