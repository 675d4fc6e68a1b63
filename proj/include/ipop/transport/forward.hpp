#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/transport/brunet_packet.hpp"

namespace ipop::transport {

// Per-transmission header update: one more hop, one less ttl. Callers
// must not forward a packet whose ttl is already zero.
inline void forward_hook(BrunetPacket& pkt)
{
    ++pkt.hops;
    --pkt.ttl;
}

// Same update applied to an encoded envelope in place; every other byte is
// left untouched.
inline void forward_hook(Bytes& encoded)
{
    --encoded[6];
    ++encoded[7];
}

} // namespace ipop::transport
