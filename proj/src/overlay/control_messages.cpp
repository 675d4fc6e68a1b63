#include "ipop/overlay/control_messages.hpp"

namespace ipop::overlay {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void write_address(ByteWriter& out, const NodeAddress& a)
{
    auto b = a.to_bytes();
    out.bytes(b);
}

NodeAddress read_address(ByteReader& in) { return NodeAddress::from_bytes(in.bytes(NodeAddress::kBytes)); }

void write_neighbors(ByteWriter& out, const std::vector<NeighborInfo>& list)
{
    auto n = std::min(list.size(), kMaxNeighbors);
    out.u8(static_cast<std::uint8_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
        write_address(out, list[i].address);
        list[i].endpoint.write(out);
    }
}

std::vector<NeighborInfo> read_neighbors(ByteReader& in)
{
    std::vector<NeighborInfo> list(in.u8());
    for (auto& n : list) {
        n.address = read_address(in);
        n.endpoint = transport::Endpoint::read(in);
    }
    return list;
}

LinkPurpose read_purpose(ByteReader& in)
{
    auto p = in.u8();
    if (p > static_cast<std::uint8_t>(LinkPurpose::Shortcut)) throw ControlDecodeError("unknown link purpose");
    return static_cast<LinkPurpose>(p);
}

} // namespace

Bytes encode_control(const ControlMessage& msg)
{
    ByteWriter out;
    std::visit(Overloaded{
                   [&](const ConnectRequest& m) {
                       out.u8(static_cast<std::uint8_t>(ControlType::ConnectRequest));
                       out.u8(static_cast<std::uint8_t>(m.purpose));
                       out.u8(m.flags);
                       m.advertised.write(out);
                       write_address(out, m.proxy);
                       write_neighbors(out, m.neighbors);
                   },
                   [&](const ConnectAck& m) {
                       out.u8(static_cast<std::uint8_t>(ControlType::ConnectAck));
                       out.u8(static_cast<std::uint8_t>(m.purpose));
                       m.advertised.write(out);
                       m.observed.write(out);
                       write_neighbors(out, m.neighbors);
                   },
                   [&](const Ping& m) {
                       out.u8(static_cast<std::uint8_t>(ControlType::Ping));
                       out.u32(m.nonce);
                   },
                   [&](const Pong& m) {
                       out.u8(static_cast<std::uint8_t>(ControlType::Pong));
                       out.u32(m.nonce);
                       m.observed.write(out);
                   },
                   [&](const NeighborList& m) {
                       out.u8(static_cast<std::uint8_t>(ControlType::NeighborList));
                       out.u8(m.flags);
                       write_neighbors(out, m.neighbors);
                   },
                   [&](const Relay& m) {
                       out.u8(static_cast<std::uint8_t>(ControlType::Relay));
                       write_address(out, m.target);
                       out.bytes(m.inner);
                   },
               },
               msg);
    return out.take();
}

ControlMessage decode_control(ByteView body)
{
    ByteReader in(body);
    try {
        switch (static_cast<ControlType>(in.u8())) {
        case ControlType::ConnectRequest: {
            ConnectRequest m;
            m.purpose = read_purpose(in);
            m.flags = in.u8();
            m.advertised = transport::Endpoint::read(in);
            m.proxy = read_address(in);
            m.neighbors = read_neighbors(in);
            return m;
        }
        case ControlType::ConnectAck: {
            ConnectAck m;
            m.purpose = read_purpose(in);
            m.advertised = transport::Endpoint::read(in);
            m.observed = transport::Endpoint::read(in);
            m.neighbors = read_neighbors(in);
            return m;
        }
        case ControlType::Ping:
            return Ping{in.u32()};
        case ControlType::Pong: {
            Pong m;
            m.nonce = in.u32();
            m.observed = transport::Endpoint::read(in);
            return m;
        }
        case ControlType::NeighborList: {
            NeighborList m;
            m.flags = in.u8();
            m.neighbors = read_neighbors(in);
            return m;
        }
        case ControlType::Relay: {
            Relay m;
            m.target = read_address(in);
            auto rest = in.rest();
            m.inner.assign(rest.begin(), rest.end());
            return m;
        }
        }
    } catch (const ShortRead&) {
        throw ControlDecodeError("truncated control message");
    }
    throw ControlDecodeError("unknown control subtype");
}

} // namespace ipop::overlay
