#include "ipop/vnet/tunnel.hpp"

#include "ipop/vnet/packet_error.hpp"

namespace ipop::vnet {

transport::BrunetPacket encapsulate(const Ipv4Packet& packet, const overlay::NodeAddress& src,
                                    const overlay::NodeAddress& dst, std::size_t payload_mtu)
{
    transport::BrunetPacket out;
    out.type = transport::PayloadType::IpTunnel;
    out.ttl = transport::kInitialTtl;
    out.hops = 0;
    out.src = src;
    out.dst = dst;
    out.payload = serialize_ipv4(packet);
    if (out.payload.size() > payload_mtu)
        throw PacketError(PacketErrc::Oversize, std::to_string(out.payload.size()) + " bytes exceeds payload MTU " +
                                                    std::to_string(payload_mtu));
    return out;
}

Ipv4Packet decapsulate(const transport::BrunetPacket& pkt)
{
    if (pkt.type != transport::PayloadType::IpTunnel)
        throw PacketError(PacketErrc::WrongType,
                          "payload type " + std::to_string(static_cast<int>(pkt.type)) + " is not an IP tunnel");
    return parse_ipv4(pkt.payload);
}

} // namespace ipop::vnet
