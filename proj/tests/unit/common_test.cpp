#include "ipop/common/bytes.hpp"
#include "ipop/common/ipv4_address.hpp"
#include "ipop/common/random.hpp"
#include "ipop/common/time.hpp"

#include <gtest/gtest.h>

#include <set>

namespace ipop {
namespace {

TEST(ByteWriter, WritesBigEndian)
{
    ByteWriter w;
    w.u8(0x01);
    w.u16(0x0203);
    w.u32(0x04050607);
    w.u64(0x08090a0b0c0d0e0fULL);
    const Bytes want{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    EXPECT_EQ(w.take(), want);
}

TEST(ByteReader, ReadsWhatWriterWrote)
{
    ByteWriter w;
    w.u16(0xbeef);
    w.u32(0xdeadc0de);
    w.u64(42);
    w.bytes(Bytes{9, 8, 7});
    const Bytes buf = w.take();
    ByteReader r(buf);
    EXPECT_EQ(r.u16(), 0xbeef);
    EXPECT_EQ(r.u32(), 0xdeadc0deu);
    EXPECT_EQ(r.u64(), 42u);
    const auto tail = r.bytes(3);
    EXPECT_EQ(Bytes(tail.begin(), tail.end()), (Bytes{9, 8, 7}));
    EXPECT_EQ(r.remaining(), 0u);
}

TEST(ByteReader, ShortReadThrowsAndLeavesPosition)
{
    const Bytes buf{1, 2, 3};
    ByteReader r(buf);
    EXPECT_THROW(r.u32(), ShortRead);
    EXPECT_EQ(r.position(), 0u);
    EXPECT_EQ(r.u16(), 0x0102);
    EXPECT_THROW(r.u16(), ShortRead);
}

TEST(Hex, RoundTrips)
{
    const Bytes data{0x00, 0x0f, 0xa0, 0xff};
    EXPECT_EQ(to_hex(data), "000fa0ff");
    EXPECT_EQ(from_hex("000fa0ff"), data);
    EXPECT_EQ(from_hex("000FA0FF"), data);
}

TEST(Ipv4Address, ParsesDottedQuad)
{
    auto a = Ipv4Address::parse("10.128.0.7");
    ASSERT_TRUE(a);
    EXPECT_EQ(a->value(), 0x0a800007u);
    EXPECT_EQ(a->to_string(), "10.128.0.7");
    EXPECT_EQ(*a, Ipv4Address(10, 128, 0, 7));
}

TEST(Ipv4Address, RejectsMalformedText)
{
    for (const char* bad : {"", "10.0.0", "10.0.0.256", "10.0.0.1.2", "a.b.c.d", "10..0.1", " 10.0.0.1", "10.0.0.1 "})
        EXPECT_FALSE(Ipv4Address::parse(bad)) << bad;
}

TEST(Ipv4Address, OrdersNumerically)
{
    EXPECT_LT(Ipv4Address(9, 255, 255, 255), Ipv4Address(10, 0, 0, 0));
    EXPECT_LT(Ipv4Address(10, 0, 0, 2), Ipv4Address(10, 0, 0, 10));
}

TEST(Rng, SameSeedSameStream)
{
    Rng a(7), b(7);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, UniformIntStaysInRange)
{
    Rng r(3);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 10000; ++i) {
        auto v = r.uniform_int(-3, 4);
        ASSERT_GE(v, -3);
        ASSERT_LE(v, 4);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 8u);
}

TEST(Rng, BernoulliExtremesDrawNothing)
{
    Rng a(5), b(5);
    EXPECT_FALSE(a.bernoulli(0.0));
    EXPECT_TRUE(a.bernoulli(1.0));
    EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, NormalHasRequestedMoments)
{
    Rng r(11);
    const int n = 200000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        double x = r.normal(5.0, 2.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    EXPECT_NEAR(mean, 5.0, 0.02);
    EXPECT_NEAR(var, 4.0, 0.05);
}

TEST(Rng, ForksAreDistinctAndReproducible)
{
    Rng a(9), b(9);
    Rng fa = a.fork(1), fb = b.fork(1);
    EXPECT_EQ(fa.next(), fb.next());
    Rng c(9);
    Rng f1 = c.fork(1);
    Rng f2 = c.fork(2);
    EXPECT_NE(f1.next(), f2.next());
}

TEST(Time, Helpers)
{
    EXPECT_EQ(millis(3), Micros{3000});
    EXPECT_EQ(seconds(2), Micros{2000000});
    EXPECT_DOUBLE_EQ(to_seconds(millis(1500)), 1.5);
}

} // namespace
} // namespace ipop
