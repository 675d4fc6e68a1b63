#include "ipop/vnet/addresses.hpp"

#include "ipop/vnet/packet_error.hpp"

#include <charconv>
#include <cstdio>

namespace ipop::vnet {

const char* to_string(PacketErrc code)
{
    switch (code) {
    case PacketErrc::Truncated: return "Truncated";
    case PacketErrc::BadVersion: return "BadVersion";
    case PacketErrc::BadLength: return "BadLength";
    case PacketErrc::BadChecksum: return "BadChecksum";
    case PacketErrc::OddLength: return "OddLength";
    case PacketErrc::Oversize: return "Oversize";
    case PacketErrc::WrongType: return "WrongType";
    }
    return "unknown";
}

MacAddress MacAddress::for_interface(VirtualIp ip)
{
    auto v = ip.value();
    return {{0x02, 0x00, static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
             static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)}};
}

std::string MacAddress::to_string() const
{
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", octets[0], octets[1], octets[2], octets[3],
                  octets[4], octets[5]);
    return buf;
}

std::optional<Subnet> Subnet::parse(std::string_view cidr)
{
    auto slash = cidr.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    auto base = Ipv4Address::parse(cidr.substr(0, slash));
    if (!base) return std::nullopt;
    auto len = cidr.substr(slash + 1);
    unsigned prefix = 0;
    auto [p, ec] = std::from_chars(len.data(), len.data() + len.size(), prefix);
    if (ec != std::errc{} || p != len.data() + len.size() || prefix > 30) return std::nullopt;
    return Subnet{*base, prefix};
}

} // namespace ipop::vnet
