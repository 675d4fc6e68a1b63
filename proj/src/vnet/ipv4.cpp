#include "ipop/vnet/ipv4.hpp"

#include "ipop/vnet/packet_error.hpp"

namespace ipop::vnet {

namespace {

std::uint32_t ones_sum(ByteView data)
{
    std::uint32_t sum = 0;
    std::size_t i = 0;
    for (; i + 1 < data.size(); i += 2) sum += (std::uint32_t{data[i]} << 8) | data[i + 1];
    if (i < data.size()) sum += std::uint32_t{data[i]} << 8;
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return sum;
}

} // namespace

std::uint16_t ipv4_checksum(ByteView header)
{
    if (header.size() % 2 != 0)
        throw PacketError(PacketErrc::OddLength, "checksum over " + std::to_string(header.size()) + " bytes");
    return static_cast<std::uint16_t>(~ones_sum(header) & 0xffff);
}

std::uint16_t internet_checksum(ByteView data) { return static_cast<std::uint16_t>(~ones_sum(data) & 0xffff); }

Ipv4Packet Ipv4Packet::make(VirtualIp src, VirtualIp dst, std::uint8_t protocol, Bytes payload,
                            std::uint16_t identification, std::uint8_t ttl)
{
    Ipv4Packet p;
    p.src = src;
    p.dst = dst;
    p.protocol = protocol;
    p.payload = std::move(payload);
    p.identification = identification;
    p.ttl = ttl;
    // Round-trip through the wire form so every derived field is set.
    return parse_ipv4(serialize_ipv4(p));
}

Ipv4Packet parse_ipv4(ByteView bytes)
{
    if (bytes.empty()) throw PacketError(PacketErrc::BadLength, "empty packet");
    Ipv4Packet p;
    p.version = bytes[0] >> 4;
    p.ihl = bytes[0] & 0x0f;
    if (p.version != 4) throw PacketError(PacketErrc::BadVersion, "version field is " + std::to_string(p.version));
    if (p.ihl < 5) throw PacketError(PacketErrc::BadLength, "ihl " + std::to_string(p.ihl) + " below 5");
    if (bytes.size() < p.header_length())
        throw PacketError(PacketErrc::BadLength, "packet shorter than its header");

    ByteReader in(bytes);
    in.u8();
    p.tos = in.u8();
    p.total_length = in.u16();
    p.identification = in.u16();
    p.flags_fragment = in.u16();
    p.ttl = in.u8();
    p.protocol = in.u8();
    p.header_checksum = in.u16();
    p.src = VirtualIp(in.u32());
    p.dst = VirtualIp(in.u32());

    if (p.total_length < p.header_length())
        throw PacketError(PacketErrc::BadLength, "total_length smaller than header");
    if (bytes.size() < p.total_length)
        throw PacketError(PacketErrc::BadLength, "total_length " + std::to_string(p.total_length) + " exceeds " +
                                                     std::to_string(bytes.size()) + " available bytes");
    if (ones_sum(bytes.first(p.header_length())) != 0xffff)
        throw PacketError(PacketErrc::BadChecksum, "header checksum does not verify");

    auto opts = bytes.subspan(kIpv4MinHeader, p.header_length() - kIpv4MinHeader);
    p.options.assign(opts.begin(), opts.end());
    auto body = bytes.subspan(p.header_length(), p.total_length - p.header_length());
    p.payload.assign(body.begin(), body.end());
    return p;
}

Bytes serialize_ipv4(const Ipv4Packet& packet)
{
    if (packet.options.size() % 4 != 0 || packet.options.size() > 40)
        throw PacketError(PacketErrc::BadLength, "options must be a multiple of 4 bytes, at most 40");
    const std::size_t header = kIpv4MinHeader + packet.options.size();
    const std::size_t total = header + packet.payload.size();
    if (total > 0xffff) throw PacketError(PacketErrc::BadLength, "packet exceeds 65535 bytes");

    ByteWriter out(total);
    out.u8(static_cast<std::uint8_t>(0x40 | (header / 4)));
    out.u8(packet.tos);
    out.u16(static_cast<std::uint16_t>(total));
    out.u16(packet.identification);
    out.u16(packet.flags_fragment);
    out.u8(packet.ttl);
    out.u8(packet.protocol);
    out.u16(0);
    out.u32(packet.src.value());
    out.u32(packet.dst.value());
    out.bytes(packet.options);
    auto& buf = out.buffer();
    auto sum = ipv4_checksum(ByteView(buf.data(), header));
    buf[10] = static_cast<std::uint8_t>(sum >> 8);
    buf[11] = static_cast<std::uint8_t>(sum);
    out.bytes(packet.payload);
    return out.take();
}

} // namespace ipop::vnet
