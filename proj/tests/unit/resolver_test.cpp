#include "ipop/common/random.hpp"
#include "ipop/resolver/dht_messages.hpp"
#include "ipop/resolver/dht_service.hpp"
#include "ipop/resolver/direct_map.hpp"
#include "ipop/resolver/mapper_store.hpp"

#include <gtest/gtest.h>

#include <set>
#include <string_view>

namespace ipop::resolver {
namespace {

using overlay::NodeAddress;

Bytes ascii(std::string_view s) { return Bytes(s.begin(), s.end()); }

TEST(HashToAddress, MatchesPublishedSha1Vectors)
{
    EXPECT_EQ(hash_to_address(ascii("abc")).to_hex(), "a9993e364706816aba3e25717850c26c9cd0d89d");
    EXPECT_EQ(hash_to_address(Bytes{}).to_hex(), "da39a3ee5e6b4b0d3255bfef95601890afd80709");
    EXPECT_EQ(hash_to_address(ascii("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")).to_hex(),
              "84983e441c3bd26ebaae4aa1f95129e5e54670f1");
}

TEST(DirectMap, HashesTheRawAddressBytes)
{
    const VirtualIp ip(10, 128, 0, 7);
    EXPECT_EQ(direct_map(ip), hash_to_address(Bytes{10, 128, 0, 7}));
}

TEST(DirectMap, FrozenValues)
{
    EXPECT_EQ(direct_map(VirtualIp(10, 0, 0, 1)).to_hex(), "1dc0b4223e187a10c52ff6a848df905710fbbeaa");
    EXPECT_EQ(direct_map(VirtualIp(10, 0, 0, 2)).to_hex(), "aa2ad8e1f3ecb0732d391d7eab9dbb996bc7d72f");
    EXPECT_EQ(direct_map(VirtualIp(10, 128, 0, 7)).to_hex(), "1f7f9a492e0a3fa8d0620e90169f6642b3875c53");
    EXPECT_EQ(direct_map(VirtualIp(192, 168, 0, 1)).to_hex(), "dc272e433df044f54e01b191d16830db33ce8591");
}

TEST(DirectMap, DistinctAddressesSpreadOverTheRing)
{
    std::set<NodeAddress> seen;
    int upper_half = 0;
    for (std::uint32_t i = 0; i < 4096; ++i) {
        const auto a = direct_map(VirtualIp(0x0a800000 + i));
        seen.insert(a);
        upper_half += a >= NodeAddress::power_of_two(159);
    }
    EXPECT_EQ(seen.size(), 4096u);
    EXPECT_NEAR(upper_half, 2048, 200);
}

TEST(DhtMessage, RoundTripsEveryOp)
{
    Rng rng(5);
    for (auto op : {DhtOp::Store, DhtOp::StoreAck, DhtOp::Lookup, DhtOp::LookupReply, DhtOp::Handoff}) {
        const DhtMessage m{op, VirtualIp(static_cast<std::uint32_t>(rng.next())), NodeAddress::random(rng), rng.next()};
        const auto wire = encode_dht(m);
        ASSERT_EQ(wire.size(), DhtMessage::kSize);
        EXPECT_EQ(wire[0], static_cast<std::uint8_t>(op));
        EXPECT_EQ(decode_dht(wire), m);
    }
}

TEST(DhtMessage, RejectsMalformedBodies)
{
    const auto wire = encode_dht(DhtMessage{});
    for (std::size_t n = 0; n < wire.size(); ++n) EXPECT_THROW(decode_dht(ByteView(wire).first(n)), DhtDecodeError) << n;
    auto bad_op = wire;
    bad_op[0] = 0;
    EXPECT_THROW(decode_dht(bad_op), DhtDecodeError);
    bad_op[0] = 6;
    EXPECT_THROW(decode_dht(bad_op), DhtDecodeError);
}

TEST(DhtMessage, NotFoundReply)
{
    DhtMessage m{DhtOp::LookupReply, VirtualIp(10, 128, 0, 9), {}, 0};
    EXPECT_TRUE(m.not_found());
    m.version = 1;
    EXPECT_FALSE(m.not_found());
}

TEST(MapperStore, VersionsClimbOnEveryWrite)
{
    const NodeAddress root = NodeAddress::from_u64(1);
    const NodeAddress owner_a = NodeAddress::from_u64(2);
    const NodeAddress owner_b = NodeAddress::from_u64(3);
    const VirtualIp ip(10, 128, 0, 5);
    MapperStore store(root);
    EXPECT_EQ(store.upsert(ip, owner_a).version, 1u);
    EXPECT_EQ(store.update_on_migrate(ip, owner_b).version, 2u);
    EXPECT_EQ(store.update_on_migrate(ip, owner_a).version, 3u);
    const auto e = store.find(ip);
    ASSERT_TRUE(e);
    EXPECT_EQ(e->owner, owner_a);
    EXPECT_EQ(e->stored_at, root);
}

TEST(MapperStore, MigratingUnknownIpIsNotFound)
{
    MapperStore store(NodeAddress::from_u64(1));
    try {
        store.update_on_migrate(VirtualIp(10, 128, 0, 5), NodeAddress::from_u64(2));
        FAIL();
    } catch (const ResolveError& e) {
        EXPECT_EQ(e.code(), ResolveErrc::NotFound);
    }
    EXPECT_EQ(store.size(), 0u);
}

TEST(MapperStore, AbsorbKeepsHigherVersion)
{
    const VirtualIp ip(10, 128, 0, 5);
    MapperStore store(NodeAddress::from_u64(1));
    store.upsert(ip, NodeAddress::from_u64(2));
    store.upsert(ip, NodeAddress::from_u64(3)); // version 2
    store.absorb(DhtEntry{ip, NodeAddress::from_u64(9), 1, NodeAddress::from_u64(7)});
    EXPECT_EQ(store.find(ip)->owner, NodeAddress::from_u64(3));
    store.absorb(DhtEntry{ip, NodeAddress::from_u64(9), 5, NodeAddress::from_u64(7)});
    EXPECT_EQ(store.find(ip)->owner, NodeAddress::from_u64(9));
    EXPECT_EQ(store.find(ip)->version, 5u);
    EXPECT_EQ(store.upsert(ip, NodeAddress::from_u64(4)).version, 6u);
    EXPECT_TRUE(store.erase(ip));
    EXPECT_FALSE(store.find(ip));
}

TEST(MapperStore, VersionsNeverDecreaseUnderRandomOperations)
{
    Rng rng(8);
    MapperStore store(NodeAddress::from_u64(1));
    std::map<VirtualIp, std::uint64_t> last;
    for (int i = 0; i < 5000; ++i) {
        const VirtualIp ip(10, 128, 0, static_cast<std::uint8_t>(rng.uniform_int(2, 9)));
        const auto owner = NodeAddress::random(rng);
        switch (rng.uniform_int(0, 2)) {
        case 0: store.upsert(ip, owner); break;
        case 1:
            if (store.find(ip)) store.update_on_migrate(ip, owner);
            break;
        default: store.absorb(DhtEntry{ip, owner, static_cast<std::uint64_t>(rng.uniform_int(0, 3000)), owner}); break;
        }
        if (auto e = store.find(ip)) {
            ASSERT_GE(e->version, last[ip]);
            last[ip] = e->version;
        }
    }
}

TEST(ResolutionCache, ExpiresExactlyAtTtl)
{
    ResolutionCache cache(seconds(30));
    const VirtualIp ip(10, 128, 0, 5);
    cache.put(ip, NodeAddress::from_u64(2), 4, seconds(10));
    const auto hit = cache.get(ip, seconds(39));
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->owner, NodeAddress::from_u64(2));
    EXPECT_EQ(hit->version, 4u);
    EXPECT_EQ(hit->expires_at, seconds(40));
    EXPECT_FALSE(cache.get(ip, seconds(40)));
    EXPECT_FALSE(cache.get(VirtualIp(10, 128, 0, 6), seconds(0)));
}

TEST(ResolutionCache, PutRefreshesAndClearEmpties)
{
    ResolutionCache cache(seconds(30));
    const VirtualIp ip(10, 128, 0, 5);
    cache.put(ip, NodeAddress::from_u64(2), 1, seconds(0));
    cache.put(ip, NodeAddress::from_u64(3), 2, seconds(20));
    EXPECT_EQ(cache.get(ip, seconds(45))->owner, NodeAddress::from_u64(3));
    cache.clear();
    EXPECT_EQ(cache.size(), 0u);
}

TEST(Resolve, DirectModeAnswersImmediately)
{
    const VirtualIp ip(10, 128, 0, 7);
    std::optional<LookupResult> got;
    resolve(ip, ResolutionMode::Direct, nullptr, [&](const LookupResult& r) { got = r; });
    ASSERT_TRUE(got);
    EXPECT_EQ(got->status, LookupStatus::Found);
    EXPECT_EQ(got->owner, direct_map(ip));
}

} // namespace
} // namespace ipop::resolver
