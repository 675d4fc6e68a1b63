#include "ipop/common/random.hpp"
#include "ipop/vnet/arp.hpp"
#include "ipop/vnet/ethernet.hpp"
#include "ipop/vnet/host_interface.hpp"
#include "ipop/vnet/host_stack.hpp"
#include "ipop/vnet/icmp.hpp"
#include "ipop/vnet/ipv4.hpp"
#include "ipop/vnet/packet_error.hpp"
#include "ipop/vnet/tunnel.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>

namespace ipop::vnet {
namespace {

template <typename F>
PacketErrc packet_error(F&& f)
{
    try {
        f();
    } catch (const PacketError& e) {
        return e.code();
    }
    ADD_FAILURE() << "no PacketError thrown";
    return PacketErrc::Truncated;
}

Bytes random_bytes(Rng& rng, std::size_t n)
{
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return b;
}

VirtualIp random_ip(Rng& rng) { return VirtualIp(static_cast<std::uint32_t>(rng.next())); }

Ipv4Packet random_ipv4(Rng& rng, std::size_t max_payload)
{
    return Ipv4Packet::make(random_ip(rng), random_ip(rng), static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
                            random_bytes(rng, static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(max_payload)))),
                            static_cast<std::uint16_t>(rng.uniform_int(0, 0xffff)),
                            static_cast<std::uint8_t>(rng.uniform_int(1, 255)));
}

// ---------------------------------------------------------------- addresses

TEST(MacAddress, InterfaceMacsAreLocalUnicastAndDistinct)
{
    std::set<MacAddress> seen;
    for (std::uint32_t i = 0; i < 1000; ++i) {
        const auto mac = MacAddress::for_interface(VirtualIp(0x0a800000 + i));
        EXPECT_EQ(mac.octets[0] & 0x01, 0) << "multicast bit";
        EXPECT_EQ(mac.octets[0] & 0x02, 0x02) << "locally administered bit";
        EXPECT_NE(mac, kGatewayMac);
        seen.insert(mac);
    }
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(kGatewayMac.to_string(), "ca:fe:00:00:00:01");
}

TEST(Subnet, ParsesCidrAndDerivesGateway)
{
    auto s = Subnet::parse("10.128.0.0/16");
    ASSERT_TRUE(s);
    EXPECT_EQ(s->gateway(), VirtualIp(10, 128, 0, 1));
    EXPECT_TRUE(s->contains(VirtualIp(10, 128, 255, 7)));
    EXPECT_FALSE(s->contains(VirtualIp(10, 129, 0, 7)));
    for (const char* bad : {"10.128.0.0", "10.128.0.0/33", "10.128.0/16", "10.128.0.0/x"})
        EXPECT_FALSE(Subnet::parse(bad)) << bad;
}

// ---------------------------------------------------------------- ethernet

TEST(Ethernet, MinimumFrameIsFourteenBytes)
{
    const Bytes header(14, 0);
    EXPECT_TRUE(parse_ethernet(header).payload.empty());
    EXPECT_EQ(packet_error([&] { parse_ethernet(ByteView(header).first(13)); }), PacketErrc::Truncated);
}

TEST(Ethernet, RoundTripsRandomFrames)
{
    Rng rng(20);
    for (int i = 0; i < 1000; ++i) {
        EthernetFrame f;
        for (auto& o : f.dst.octets) o = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        for (auto& o : f.src.octets) o = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        f.ethertype = static_cast<std::uint16_t>(rng.uniform_int(0, 0xffff));
        f.payload = random_bytes(rng, static_cast<std::size_t>(rng.uniform_int(0, 1500)));
        const auto wire = serialize_ethernet(f);
        ASSERT_EQ(wire.size(), 14 + f.payload.size());
        ASSERT_EQ(parse_ethernet(wire), f);
    }
}

// ---------------------------------------------------------------- ipv4

TEST(Ipv4Checksum, KnownHeader)
{
    // 192.168.0.1 -> 192.168.0.199, UDP, with its checksum field zeroed.
    const Bytes header = from_hex("450000730000400040110000c0a80001c0a800c7");
    EXPECT_EQ(ipv4_checksum(header), 0xb861);
    EXPECT_EQ(oracle::ones_complement_checksum(header), 0xb861);
}

TEST(Ipv4Checksum, MatchesOracleAndVerifiesToZero)
{
    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        const auto pkt = random_ipv4(rng, 64);
        const auto wire = serialize_ipv4(pkt);
        const ByteView header = ByteView(wire).first(pkt.header_length());
        Bytes zeroed(header.begin(), header.end());
        zeroed[10] = zeroed[11] = 0;
        ASSERT_EQ(ipv4_checksum(zeroed), oracle::ones_complement_checksum(zeroed));
        ASSERT_EQ(ipv4_checksum(header), 0);
    }
    EXPECT_EQ(packet_error([] { ipv4_checksum(Bytes(3)); }), PacketErrc::OddLength);
}

TEST(InternetChecksum, PadsOddTrailingByte)
{
    const Bytes odd{0x12, 0x34, 0x56};
    const Bytes padded{0x12, 0x34, 0x56, 0x00};
    EXPECT_EQ(internet_checksum(odd), oracle::ones_complement_checksum(padded));
}

TEST(Ipv4, RoundTripsRandomPackets)
{
    Rng rng(22);
    for (int i = 0; i < 1000; ++i) {
        const auto pkt = random_ipv4(rng, 1400);
        const auto wire = serialize_ipv4(pkt);
        ASSERT_EQ(wire.size(), pkt.total_length);
        ASSERT_EQ(parse_ipv4(wire), pkt);
    }
}

TEST(Ipv4, IgnoresLinkPadding)
{
    const auto pkt = Ipv4Packet::make(VirtualIp(10, 128, 0, 2), VirtualIp(10, 128, 0, 3), kProtoIcmp, Bytes{1, 2});
    auto wire = serialize_ipv4(pkt);
    wire.resize(wire.size() + 20, 0);
    EXPECT_EQ(parse_ipv4(wire), pkt);
}

TEST(Ipv4, RejectsCorruption)
{
    const auto pkt = Ipv4Packet::make(VirtualIp(10, 128, 0, 2), VirtualIp(10, 128, 0, 3), kProtoIcmp, Bytes(8, 1));
    const auto wire = serialize_ipv4(pkt);

    auto flipped = wire;
    flipped[15] ^= 0x01;
    EXPECT_EQ(packet_error([&] { parse_ipv4(flipped); }), PacketErrc::BadChecksum);

    auto v6 = wire;
    v6[0] = 0x65;
    EXPECT_EQ(packet_error([&] { parse_ipv4(v6); }), PacketErrc::BadVersion);

    auto long_claim = wire;
    long_claim[3] = static_cast<std::uint8_t>(long_claim[3] + 1);
    EXPECT_EQ(packet_error([&] { parse_ipv4(long_claim); }), PacketErrc::BadLength);

    EXPECT_EQ(packet_error([&] { parse_ipv4(ByteView(wire).first(19)); }), PacketErrc::BadLength);
}

// ---------------------------------------------------------------- icmp

TEST(IcmpEcho, RoundTripAndChecksum)
{
    IcmpEcho e;
    e.id = 0x1234;
    e.seq = 7;
    e.data = Bytes(HostStack::kEchoDataSize, 0xab);
    const auto wire = serialize_icmp_echo(e);
    EXPECT_EQ(internet_checksum(wire), 0);
    auto back = parse_icmp_echo(wire);
    ASSERT_TRUE(back);
    EXPECT_EQ(back->id, 0x1234);
    EXPECT_EQ(back->seq, 7);
    EXPECT_EQ(back->data, e.data);
    auto bad = wire;
    bad[9] ^= 0xff;
    EXPECT_FALSE(parse_icmp_echo(bad));
    EXPECT_FALSE(parse_icmp_echo(ByteView(wire).first(7)));
}

// ---------------------------------------------------------------- arp

EthernetFrame arp_request(const HostInterface& host, VirtualIp target)
{
    ArpPacket a;
    a.operation = kArpRequest;
    a.sender_mac = host.mac;
    a.sender_ip = host.ip;
    a.target_ip = target;
    return EthernetFrame{MacAddress::broadcast(), host.mac, kEtherTypeArp, serialize_arp(a)};
}

TEST(Arp, BodyRoundTrips)
{
    ArpPacket a;
    a.operation = kArpReply;
    a.sender_mac = kGatewayMac;
    a.sender_ip = VirtualIp(10, 128, 0, 1);
    a.target_mac = MacAddress::for_interface(VirtualIp(10, 128, 0, 2));
    a.target_ip = VirtualIp(10, 128, 0, 2);
    const auto wire = serialize_arp(a);
    ASSERT_EQ(wire.size(), 28u);
    auto back = parse_arp(wire);
    ASSERT_TRUE(back);
    EXPECT_EQ(back->operation, kArpReply);
    EXPECT_EQ(back->sender_mac, a.sender_mac);
    EXPECT_EQ(back->target_ip, a.target_ip);
    EXPECT_FALSE(parse_arp(ByteView(wire).first(27)));
}

TEST(Arp, EveryQueryResolvesToGateway)
{
    const HostInterface host(VirtualIp(10, 128, 0, 2));
    for (const auto target : {VirtualIp(10, 128, 0, 1), VirtualIp(10, 128, 0, 7), VirtualIp(8, 8, 8, 8)}) {
        const auto reply = handle_arp(arp_request(host, target), host);
        ASSERT_TRUE(reply) << target.to_string();
        EXPECT_EQ(reply->dst, host.mac);
        EXPECT_EQ(reply->src, kGatewayMac);
        EXPECT_EQ(reply->ethertype, kEtherTypeArp);
        const auto body = parse_arp(reply->payload);
        ASSERT_TRUE(body);
        EXPECT_EQ(body->operation, kArpReply);
        EXPECT_EQ(body->sender_mac, kGatewayMac);
        EXPECT_EQ(body->sender_ip, target);
        EXPECT_EQ(body->target_mac, host.mac);
        EXPECT_EQ(body->target_ip, host.ip);
    }
}

TEST(Arp, GratuitousRepliesAndOtherFramesAreIgnored)
{
    const HostInterface host(VirtualIp(10, 128, 0, 2));
    EXPECT_FALSE(handle_arp(arp_request(host, host.ip), host));

    auto reply_frame = arp_request(host, VirtualIp(10, 128, 0, 9));
    auto body = *parse_arp(reply_frame.payload);
    body.operation = kArpReply;
    reply_frame.payload = serialize_arp(body);
    EXPECT_FALSE(handle_arp(reply_frame, host));

    auto ip_frame = arp_request(host, VirtualIp(10, 128, 0, 9));
    ip_frame.ethertype = kEtherTypeIpv4;
    EXPECT_FALSE(handle_arp(ip_frame, host));
}

// ---------------------------------------------------------------- tunnel

TEST(Tunnel, RoundTripsAndStampsFreshHeader)
{
    Rng rng(23);
    const auto src = overlay::NodeAddress::random(rng);
    const auto dst = overlay::NodeAddress::random(rng);
    for (int i = 0; i < 200; ++i) {
        const auto pkt = random_ipv4(rng, 1380);
        const auto env = encapsulate(pkt, src, dst);
        EXPECT_EQ(env.type, transport::PayloadType::IpTunnel);
        EXPECT_EQ(env.ttl, 64);
        EXPECT_EQ(env.hops, 0);
        EXPECT_EQ(env.src, src);
        EXPECT_EQ(env.dst, dst);
        ASSERT_EQ(decapsulate(transport::decode(transport::encode(env))), pkt);
    }
}

TEST(Tunnel, EnforcesPayloadMtu)
{
    const auto at_limit = Ipv4Packet::make(VirtualIp(10, 128, 0, 2), VirtualIp(10, 128, 0, 3), kProtoBulk, Bytes(1380));
    ASSERT_EQ(at_limit.total_length, 1400);
    EXPECT_NO_THROW(encapsulate(at_limit, {}, {}));
    const auto over = Ipv4Packet::make(VirtualIp(10, 128, 0, 2), VirtualIp(10, 128, 0, 3), kProtoBulk, Bytes(1381));
    EXPECT_EQ(packet_error([&] { encapsulate(over, {}, {}); }), PacketErrc::Oversize);
}

TEST(Tunnel, TruncatedPayloadNeverDecapsulates)
{
    const auto pkt = Ipv4Packet::make(VirtualIp(10, 128, 0, 2), VirtualIp(10, 128, 0, 3), kProtoBulk, Bytes(40, 5));
    auto env = encapsulate(pkt, {}, {});
    const Bytes full = env.payload;
    for (std::size_t n = 0; n < full.size(); ++n) {
        env.payload.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(n));
        EXPECT_EQ(packet_error([&] { decapsulate(env); }), PacketErrc::BadLength) << n;
    }
}

TEST(Tunnel, RejectsNonTunnelEnvelopes)
{
    const auto pkt = Ipv4Packet::make(VirtualIp(10, 128, 0, 2), VirtualIp(10, 128, 0, 3), kProtoBulk, Bytes(4));
    auto env = encapsulate(pkt, {}, {});
    env.type = transport::PayloadType::Dht;
    EXPECT_EQ(packet_error([&] { decapsulate(env); }), PacketErrc::WrongType);
}

// ---------------------------------------------------------------- host stack

// Plays the role of IPOP on the other side of the interface: answers ARP,
// collects IP frames.
std::vector<Ipv4Packet> drain(HostInterface& iface)
{
    std::vector<Ipv4Packet> ip;
    while (!iface.from_host.empty()) {
        const auto frame = parse_ethernet(iface.from_host.front());
        iface.from_host.pop_front();
        if (frame.ethertype == kEtherTypeArp) {
            if (auto reply = handle_arp(frame, iface)) iface.to_host.push_back(serialize_ethernet(*reply));
        } else {
            EXPECT_EQ(frame.dst, kGatewayMac);
            ip.push_back(parse_ipv4(frame.payload));
        }
    }
    return ip;
}

void inject(HostInterface& iface, const Ipv4Packet& pkt)
{
    iface.to_host.push_back(serialize_ethernet({iface.mac, kGatewayMac, kEtherTypeIpv4, serialize_ipv4(pkt)}));
}

TEST(HostStack, PingArpsThenSendsEcho)
{
    HostInterface iface(VirtualIp(10, 128, 0, 2));
    HostStack stack(iface, kDefaultSubnet);
    const VirtualIp peer(10, 128, 0, 3);

    stack.ping(peer, 1, Micros{0});
    EXPECT_TRUE(drain(iface).empty()); // only the ARP request went out
    stack.process_inbound(Micros{10});
    auto sent = drain(iface);
    ASSERT_EQ(sent.size(), 1u);
    EXPECT_EQ(sent[0].dst, peer);
    EXPECT_EQ(sent[0].protocol, kProtoIcmp);
    const auto echo = parse_icmp_echo(sent[0].payload);
    ASSERT_TRUE(echo);
    EXPECT_EQ(echo->type, kIcmpEchoRequest);
    EXPECT_EQ(echo->seq, 1);

    std::vector<EchoReply> replies;
    stack.on_echo_reply = [&](const EchoReply& r) { replies.push_back(r); };
    IcmpEcho back = *echo;
    back.type = kIcmpEchoReply;
    inject(iface, Ipv4Packet::make(peer, iface.ip, kProtoIcmp, serialize_icmp_echo(back)));
    stack.process_inbound(Micros{500});
    ASSERT_EQ(replies.size(), 1u);
    EXPECT_EQ(replies[0].peer, peer);
    EXPECT_EQ(replies[0].seq, 1);
    EXPECT_EQ(replies[0].received_at, Micros{500});

    // The cache now holds the peer, so a second ping needs no ARP.
    stack.ping(peer, 2, Micros{600});
    EXPECT_EQ(drain(iface).size(), 1u);
    EXPECT_EQ(stack.counters().arp_requests, 1u);
}

TEST(HostStack, AnswersEchoRequests)
{
    HostInterface iface(VirtualIp(10, 128, 0, 3));
    HostStack stack(iface, kDefaultSubnet);
    IcmpEcho req;
    req.id = 9;
    req.seq = 4;
    req.data = Bytes(8, 1);
    inject(iface, Ipv4Packet::make(VirtualIp(10, 128, 0, 2), iface.ip, kProtoIcmp, serialize_icmp_echo(req)));
    stack.process_inbound(Micros{0});
    drain(iface);
    stack.process_inbound(Micros{1});
    const auto out = drain(iface);
    ASSERT_EQ(out.size(), 1u);
    const auto reply = parse_icmp_echo(out[0].payload);
    ASSERT_TRUE(reply);
    EXPECT_EQ(reply->type, kIcmpEchoReply);
    EXPECT_EQ(reply->id, 9);
    EXPECT_EQ(reply->seq, 4);
    EXPECT_EQ(reply->data, req.data);
    EXPECT_EQ(stack.counters().echo_requests_answered, 1u);
}

TEST(HostStack, CountsBadInjections)
{
    HostInterface iface(VirtualIp(10, 128, 0, 3));
    HostStack stack(iface, kDefaultSubnet);
    auto wire = serialize_ipv4(Ipv4Packet::make(VirtualIp(10, 128, 0, 2), iface.ip, kProtoBulk, Bytes(10)));
    wire[12] ^= 0x01;
    iface.to_host.push_back(serialize_ethernet({iface.mac, kGatewayMac, kEtherTypeIpv4, wire}));
    const auto valid = serialize_ipv4(Ipv4Packet::make(VirtualIp(10, 128, 0, 2), iface.ip, kProtoBulk, Bytes(10)));
    iface.to_host.push_back(serialize_ethernet({iface.mac, iface.mac, kEtherTypeIpv4, valid}));
    stack.process_inbound(Micros{0});
    EXPECT_EQ(stack.counters().bad_checksum, 1u);
    EXPECT_EQ(stack.counters().bad_framing, 1u);
}

TEST(HostStack, BulkBytesReachSink)
{
    HostInterface iface(VirtualIp(10, 128, 0, 3));
    HostStack stack(iface, kDefaultSubnet);
    std::size_t total = 0;
    stack.on_bulk = [&](VirtualIp, std::size_t n, TimePoint) { total += n; };
    inject(iface, Ipv4Packet::make(VirtualIp(10, 128, 0, 2), iface.ip, kProtoBulk, Bytes(1000)));
    inject(iface, Ipv4Packet::make(VirtualIp(10, 128, 0, 2), iface.ip, kProtoBulk, Bytes(0)));
    stack.process_inbound(Micros{0});
    EXPECT_EQ(total, 1000u);
}

} // namespace
} // namespace ipop::vnet
