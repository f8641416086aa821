#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "bri2d/rng.hpp"
#include "bri2d/stats.hpp"

using namespace bri2d;

// Known-answer vectors of the Philox4x32-10 reference implementation
TEST(Philox, KnownAnswerZero)
{
    auto b = Philox4x32::generate(0, 0, 0);
    EXPECT_EQ(b[0], 0x6627e8d5u);
    EXPECT_EQ(b[1], 0xe169c58du);
    EXPECT_EQ(b[2], 0xbc57ac4cu);
    EXPECT_EQ(b[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes)
{
    auto b = Philox4x32::generate(~0ull, ~0ull, ~0ull);
    EXPECT_EQ(b[0], 0x408f276du);
    EXPECT_EQ(b[1], 0x41c83b0eu);
    EXPECT_EQ(b[2], 0xa20bc7c6u);
    EXPECT_EQ(b[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi)
{
    auto b = Philox4x32::generate(0x299f31d0a4093822ull, 0x0370734413198a2eull,
                                  0x85a308d3243f6a88ull);
    EXPECT_EQ(b[0], 0xd16cfe09u);
    EXPECT_EQ(b[1], 0x94fdccebu);
    EXPECT_EQ(b[2], 0x5001e420u);
    EXPECT_EQ(b[3], 0x24126ea1u);
}

TEST(RngStream, Reproducible)
{
    RngStream a(7, 3), b(7, 3);
    for (int i = 0; i < 1000; ++i)
    {
        ASSERT_EQ(a.next_u64(), b.next_u64());
    }
    RngStream c(7, 3), d(7, 3);
    for (int i = 0; i < 101; ++i)
    {
        ASSERT_EQ(c.normal(), d.normal());
    }
}

TEST(RngStream, StreamsDiffer)
{
    RngStream a(7, 3), b(7, 4), c(8, 3);
    EXPECT_NE(a.next_u64(), b.next_u64());
    RngStream a2(7, 3);
    EXPECT_NE(a2.next_u64(), c.next_u64());
}

TEST(RngStream, ChildLeavesParentUntouched)
{
    RngStream a(1, 2);
    auto before = a.counter();
    auto ch = a.child(5);
    EXPECT_EQ(a.counter(), before);
    EXPECT_EQ(ch.stream_id(), derive_stream(2, 5));
    EXPECT_NE(a.child(5).next_u64(), a.child(6).next_u64());
}

TEST(RngStream, DerivedStreamsDistinct)
{
    std::set<std::uint64_t> ids;
    for (std::uint64_t p = 0; p < 50; ++p)
    {
        for (std::uint64_t t = 0; t < 50; ++t)
        {
            ids.insert(derive_stream(p, t));
        }
    }
    EXPECT_EQ(ids.size(), 2500u);
}

TEST(RngStream, UniformRange)
{
    EXPECT_GT(to_unit_open_closed(0), 0.0);
    EXPECT_EQ(to_unit_open_closed(~0ull), 1.0);
    RngStream r(11, 0);
    for (int i = 0; i < 10000; ++i)
    {
        double u = r.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
    }
}

TEST(RngStream, UniformIsUniform)
{
    RngStream r(12, 0);
    std::vector<double> u(20000);
    for (auto& v : u)
    {
        v = r.uniform();
    }
    auto t = stats::ks_test(u, [](double x) { return std::clamp(x, 0.0, 1.0); });
    EXPECT_GT(t.p_value, 0.001);
}

TEST(RngStream, NormalMoments)
{
    RngStream r(13, 0);
    std::vector<double> g(40000);
    for (auto& v : g)
    {
        v = r.normal();
    }
    auto s = stats::summarize(g);
    EXPECT_NEAR(s.mean, 0, 4 / std::sqrt(40000.0));
    EXPECT_NEAR(s.variance, 1, 4 * std::sqrt(2 / 40000.0));
    auto t = stats::ks_test(g, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); });
    EXPECT_GT(t.p_value, 0.001);
}

TEST(RngStream, ExponentialLaw)
{
    RngStream r(14, 0);
    std::vector<double> e(20000);
    for (auto& v : e)
    {
        v = draw_exponential(r);
    }
    EXPECT_GT(stats::ks_exponential(e).p_value, 0.001);
}

TEST(RngStream, AngleRange)
{
    RngStream r(15, 0);
    for (int i = 0; i < 10000; ++i)
    {
        double a = r.angle();
        ASSERT_GE(a, 0.0);
        ASSERT_LT(a, 2 * std::numbers::pi);
    }
}

TEST(KeyedNormals, PureFunctionOfKey)
{
    auto a = keyed_normals4(3, 9, 17);
    auto b = keyed_normals4(3, 9, 17);
    auto c = keyed_normals4(3, 9, 18);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(KeyedNormals, StandardMoments)
{
    std::vector<double> g;
    for (std::uint64_t i = 0; i < 10000; ++i)
    {
        for (double v : keyed_normals4(1, 2, i))
        {
            g.push_back(v);
        }
    }
    auto s = stats::summarize(g);
    EXPECT_NEAR(s.mean, 0, 4 / std::sqrt(40000.0));
    EXPECT_NEAR(s.variance, 1, 4 * std::sqrt(2 / 40000.0));
}
