#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/common/ipv4_address.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ipop::transport {

/// A physical (ip, port) pair a channel can address. Port 0 marks an
/// unset endpoint and never appears on the wire as a destination.
struct Endpoint {
    Ipv4Address ip;
    std::uint16_t port = 0;

    bool valid() const { return port != 0; }
    std::string to_string() const { return ip.to_string() + ":" + std::to_string(port); }
    static std::optional<Endpoint> parse(std::string_view text);

    // 4-byte address then 2-byte port, big-endian.
    void write(ByteWriter& out) const
    {
        out.u32(ip.value());
        out.u16(port);
    }
    static Endpoint read(ByteReader& in)
    {
        Endpoint e;
        e.ip = Ipv4Address(in.u32());
        e.port = in.u16();
        return e;
    }

    auto operator<=>(const Endpoint&) const = default;
};

} // namespace ipop::transport
