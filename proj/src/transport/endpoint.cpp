#include "ipop/transport/endpoint.hpp"

#include <charconv>

namespace ipop::transport {

std::optional<Endpoint> Endpoint::parse(std::string_view text)
{
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos) return std::nullopt;
    auto ip = Ipv4Address::parse(text.substr(0, colon));
    if (!ip) return std::nullopt;
    auto port_text = text.substr(colon + 1);
    unsigned port = 0;
    auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || p != port_text.data() + port_text.size() || port == 0 || port > 65535)
        return std::nullopt;
    return Endpoint{*ip, static_cast<std::uint16_t>(port)};
}

} // namespace ipop::transport
