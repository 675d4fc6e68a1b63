#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/overlay/node_address.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ipop::transport {

using overlay::NodeAddress;

enum class PayloadType : std::uint8_t {
    IpTunnel = 0x01,
    OverlayControl = 0x04,
    Dht = 0x05,
};

inline constexpr std::uint8_t kMagic[4] = {0x49, 0x50, 0x4F, 0x50}; // "IPOP"
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderSize = 48;
inline constexpr std::uint8_t kInitialTtl = 64;

/// The overlay envelope. Wire layout, all big-endian:
///
///   0  magic "IPOP"     4
///   4  version          1
///   5  payload type     1
///   6  ttl              1
///   7  hops             1
///   8  source address  20
///  28  dest address    20
///  48  payload          *
struct BrunetPacket {
    PayloadType type = PayloadType::IpTunnel;
    std::uint8_t ttl = kInitialTtl;
    std::uint8_t hops = 0;
    NodeAddress src;
    NodeAddress dst;
    Bytes payload;

    bool operator==(const BrunetPacket&) const = default;
};

enum class DecodeErrc { BadMagic, BadVersion, UnknownType, Truncated };

class DecodeError : public std::runtime_error {
public:
    explicit DecodeError(DecodeErrc code);
    DecodeErrc code() const { return code_; }

private:
    DecodeErrc code_;
};

const char* to_string(DecodeErrc code);

Bytes encode(const BrunetPacket& pkt);
BrunetPacket decode(ByteView bytes);

bool is_known_payload_type(std::uint8_t value);

} // namespace ipop::transport
