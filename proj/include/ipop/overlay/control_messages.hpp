#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/overlay/node_address.hpp"
#include "ipop/transport/endpoint.hpp"

#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

namespace ipop::overlay {

// Body of overlay-control (0x04) envelopes: a subtype byte, then fields.
enum class ControlType : std::uint8_t {
    ConnectRequest = 1,
    ConnectAck = 2,
    Ping = 3,
    Pong = 4,
    NeighborList = 5,
    Relay = 6,
};

enum class LinkPurpose : std::uint8_t {
    Leaf = 0,     // temporary attachment to a bootstrap during join
    Join = 1,     // routed to the joiner's own address
    Near = 2,     // ring neighbor
    Shortcut = 3, // long-range link, routed to a ring key
};

struct NeighborInfo {
    NodeAddress address;
    transport::Endpoint endpoint;
    bool operator==(const NeighborInfo&) const = default;
};

struct ConnectRequest {
    static constexpr std::uint8_t kRouted = 0x01;
    static constexpr std::uint8_t kInitiator = 0x02;

    LinkPurpose purpose = LinkPurpose::Near;
    std::uint8_t flags = 0;
    transport::Endpoint advertised;
    NodeAddress proxy; // the joiner's bootstrap, for Join requests
    std::vector<NeighborInfo> neighbors;

    bool routed() const { return (flags & kRouted) != 0; }
    bool initiator() const { return (flags & kInitiator) != 0; }
    bool operator==(const ConnectRequest&) const = default;
};

struct ConnectAck {
    LinkPurpose purpose = LinkPurpose::Near;
    transport::Endpoint advertised;
    transport::Endpoint observed; // where the request was seen coming from
    std::vector<NeighborInfo> neighbors;
    bool operator==(const ConnectAck&) const = default;
};

struct Ping {
    std::uint32_t nonce = 0;
    bool operator==(const Ping&) const = default;
};

struct Pong {
    std::uint32_t nonce = 0;
    transport::Endpoint observed;
    bool operator==(const Pong&) const = default;
};

struct NeighborList {
    static constexpr std::uint8_t kReplyRequested = 0x01;

    std::uint8_t flags = 0;
    std::vector<NeighborInfo> neighbors;

    bool reply_requested() const { return (flags & kReplyRequested) != 0; }
    bool operator==(const NeighborList&) const = default;
};

/// Hand `inner` (an encoded envelope) to `target`, which the receiver is
/// directly connected to or holds as a leaf.
struct Relay {
    NodeAddress target;
    Bytes inner;
    bool operator==(const Relay&) const = default;
};

using ControlMessage = std::variant<ConnectRequest, ConnectAck, Ping, Pong, NeighborList, Relay>;

class ControlDecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Bytes encode_control(const ControlMessage& msg);
ControlMessage decode_control(ByteView body);

// Neighbor lists carry at most this many entries.
inline constexpr std::size_t kMaxNeighbors = 255;

} // namespace ipop::overlay
