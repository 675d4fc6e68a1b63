#include "ipop/vnet/ethernet.hpp"

#include "ipop/vnet/packet_error.hpp"

#include <algorithm>

namespace ipop::vnet {

EthernetFrame parse_ethernet(ByteView bytes)
{
    if (bytes.size() < kEthernetHeaderSize)
        throw PacketError(PacketErrc::Truncated, "ethernet frame of " + std::to_string(bytes.size()) + " bytes");
    EthernetFrame f;
    std::copy_n(bytes.begin(), 6, f.dst.octets.begin());
    std::copy_n(bytes.begin() + 6, 6, f.src.octets.begin());
    f.ethertype = static_cast<std::uint16_t>((bytes[12] << 8) | bytes[13]);
    f.payload.assign(bytes.begin() + kEthernetHeaderSize, bytes.end());
    return f;
}

Bytes serialize_ethernet(const EthernetFrame& frame)
{
    ByteWriter out(kEthernetHeaderSize + frame.payload.size());
    out.bytes(frame.dst.octets);
    out.bytes(frame.src.octets);
    out.u16(frame.ethertype);
    out.bytes(frame.payload);
    return out.take();
}

} // namespace ipop::vnet
