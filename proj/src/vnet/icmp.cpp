#include "ipop/vnet/icmp.hpp"

#include "ipop/vnet/ipv4.hpp"

namespace ipop::vnet {

Bytes serialize_icmp_echo(const IcmpEcho& echo)
{
    ByteWriter out(8 + echo.data.size());
    out.u8(echo.type);
    out.u8(echo.code);
    out.u16(0);
    out.u16(echo.id);
    out.u16(echo.seq);
    out.bytes(echo.data);
    auto& buf = out.buffer();
    auto sum = internet_checksum(buf);
    buf[2] = static_cast<std::uint8_t>(sum >> 8);
    buf[3] = static_cast<std::uint8_t>(sum);
    return out.take();
}

std::optional<IcmpEcho> parse_icmp_echo(ByteView bytes)
{
    if (bytes.size() < 8) return std::nullopt;
    if (internet_checksum(bytes) != 0) return std::nullopt;
    IcmpEcho e;
    e.type = bytes[0];
    e.code = bytes[1];
    if (e.type != kIcmpEchoRequest && e.type != kIcmpEchoReply) return std::nullopt;
    e.id = static_cast<std::uint16_t>((bytes[4] << 8) | bytes[5]);
    e.seq = static_cast<std::uint16_t>((bytes[6] << 8) | bytes[7]);
    e.data.assign(bytes.begin() + 8, bytes.end());
    return e;
}

} // namespace ipop::vnet
