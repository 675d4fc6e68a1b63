#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/resolver/direct_map.hpp"

#include <cstdint>
#include <stdexcept>

namespace ipop::resolver {

enum class DhtOp : std::uint8_t {
    Store = 1,
    StoreAck = 2,
    Lookup = 3,
    LookupReply = 4,
    Handoff = 5,
};

/// Body of a DHT (0x05) envelope: op byte, 4-byte ip, 20-byte owner, 8-byte
/// version. A lookup reply with a zero owner and version 0 means not found.
struct DhtMessage {
    static constexpr std::size_t kSize = 1 + 4 + 20 + 8;

    DhtOp op = DhtOp::Lookup;
    VirtualIp ip;
    overlay::NodeAddress owner;
    std::uint64_t version = 0;

    bool not_found() const { return owner.is_zero() && version == 0; }
    bool operator==(const DhtMessage&) const = default;
};

class DhtDecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Bytes encode_dht(const DhtMessage& msg);
DhtMessage decode_dht(ByteView body);

} // namespace ipop::resolver
