#include "ipop/common/ipv4_address.hpp"

#include <charconv>

namespace ipop {

std::optional<Ipv4Address> Ipv4Address::parse(std::string_view text)
{
    std::uint32_t value = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int i = 0; i < 4; ++i) {
        unsigned octet = 0;
        auto [next, ec] = std::from_chars(p, end, octet);
        if (ec != std::errc{} || next == p || octet > 255 || next - p > 3) return std::nullopt;
        value = (value << 8) | octet;
        p = next;
        if (i < 3) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
    }
    if (p != end) return std::nullopt;
    return Ipv4Address(value);
}

std::string Ipv4Address::to_string() const
{
    return std::to_string(value_ >> 24) + "." + std::to_string((value_ >> 16) & 0xff) + "." +
           std::to_string((value_ >> 8) & 0xff) + "." + std::to_string(value_ & 0xff);
}

} // namespace ipop
