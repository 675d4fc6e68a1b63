#include "ipop/resolver/dht_messages.hpp"

namespace ipop::resolver {

Bytes encode_dht(const DhtMessage& msg)
{
    ByteWriter out(DhtMessage::kSize);
    out.u8(static_cast<std::uint8_t>(msg.op));
    out.u32(msg.ip.value());
    auto owner = msg.owner.to_bytes();
    out.bytes(owner);
    out.u64(msg.version);
    return out.take();
}

DhtMessage decode_dht(ByteView body)
{
    if (body.size() != DhtMessage::kSize) throw DhtDecodeError("DHT message has wrong length");
    ByteReader in(body);
    DhtMessage msg;
    auto op = in.u8();
    if (op < 1 || op > 5) throw DhtDecodeError("unknown DHT op");
    msg.op = static_cast<DhtOp>(op);
    msg.ip = VirtualIp(in.u32());
    msg.owner = overlay::NodeAddress::from_bytes(in.bytes(20));
    msg.version = in.u64();
    return msg;
}

} // namespace ipop::resolver
