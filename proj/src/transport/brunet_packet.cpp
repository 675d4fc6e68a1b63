#include "ipop/transport/brunet_packet.hpp"

#include <algorithm>

namespace ipop::transport {

const char* to_string(DecodeErrc code)
{
    switch (code) {
    case DecodeErrc::BadMagic: return "BadMagic";
    case DecodeErrc::BadVersion: return "BadVersion";
    case DecodeErrc::UnknownType: return "UnknownType";
    case DecodeErrc::Truncated: return "Truncated";
    }
    return "unknown";
}

DecodeError::DecodeError(DecodeErrc code)
    : std::runtime_error(std::string("envelope decode failed: ") + to_string(code)), code_(code)
{
}

bool is_known_payload_type(std::uint8_t value)
{
    return value == static_cast<std::uint8_t>(PayloadType::IpTunnel) ||
           value == static_cast<std::uint8_t>(PayloadType::OverlayControl) ||
           value == static_cast<std::uint8_t>(PayloadType::Dht);
}

Bytes encode(const BrunetPacket& pkt)
{
    ByteWriter out(kHeaderSize + pkt.payload.size());
    out.bytes(kMagic);
    out.u8(kWireVersion);
    out.u8(static_cast<std::uint8_t>(pkt.type));
    out.u8(pkt.ttl);
    out.u8(pkt.hops);
    out.bytes(pkt.src.to_bytes());
    out.bytes(pkt.dst.to_bytes());
    out.bytes(pkt.payload);
    return out.take();
}

BrunetPacket decode(ByteView bytes)
{
    // Check fields in wire order so that a mutated magic is reported as
    // such even on a short buffer.
    for (std::size_t i = 0; i < 4; ++i) {
        if (i >= bytes.size()) throw DecodeError(DecodeErrc::Truncated);
        if (bytes[i] != kMagic[i]) throw DecodeError(DecodeErrc::BadMagic);
    }
    if (bytes.size() < 5) throw DecodeError(DecodeErrc::Truncated);
    if (bytes[4] != kWireVersion) throw DecodeError(DecodeErrc::BadVersion);
    if (bytes.size() < 6) throw DecodeError(DecodeErrc::Truncated);
    if (!is_known_payload_type(bytes[5])) throw DecodeError(DecodeErrc::UnknownType);
    if (bytes.size() < kHeaderSize) throw DecodeError(DecodeErrc::Truncated);

    BrunetPacket pkt;
    pkt.type = static_cast<PayloadType>(bytes[5]);
    pkt.ttl = bytes[6];
    pkt.hops = bytes[7];
    pkt.src = NodeAddress::from_bytes(bytes.subspan(8, 20));
    pkt.dst = NodeAddress::from_bytes(bytes.subspan(28, 20));
    pkt.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
    return pkt;
}

} // namespace ipop::transport
