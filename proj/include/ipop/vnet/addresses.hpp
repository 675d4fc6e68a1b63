#pragma once

#include "ipop/common/ipv4_address.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ipop::vnet {

using VirtualIp = Ipv4Address;

struct MacAddress {
    std::array<std::uint8_t, 6> octets{};

    static constexpr MacAddress broadcast() { return {{0xff, 0xff, 0xff, 0xff, 0xff, 0xff}}; }
    // Locally administered, unicast.
    static MacAddress for_interface(VirtualIp ip);

    std::string to_string() const;
    auto operator<=>(const MacAddress&) const = default;
};

// Phantom gateway MAC: locally administered so it cannot collide with a
// real NIC, and distinct from every interface MAC produced above.
inline constexpr MacAddress kGatewayMac{{0xCA, 0xFE, 0x00, 0x00, 0x00, 0x01}};

struct Subnet {
    VirtualIp base;
    unsigned prefix = 16;

    static std::optional<Subnet> parse(std::string_view cidr); // "10.128.0.0/16"

    std::uint32_t mask() const { return prefix == 0 ? 0 : ~std::uint32_t{0} << (32 - prefix); }
    bool contains(VirtualIp ip) const { return (ip.value() & mask()) == (base.value() & mask()); }
    VirtualIp gateway() const { return VirtualIp((base.value() & mask()) + 1); }
    std::string to_string() const { return base.to_string() + "/" + std::to_string(prefix); }
};

inline const Subnet kDefaultSubnet{VirtualIp(10, 128, 0, 0), 16};

} // namespace ipop::vnet
