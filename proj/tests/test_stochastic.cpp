#include <cmath>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "bri2d/path.hpp"
#include "bri2d/stats.hpp"
#include "bri2d/stochastic.hpp"

using namespace bri2d;

namespace
{
//! Planar refinable path with the given lifted vertices and unit times
PlanarPath planar_bridge_path(std::vector<Point> pts, std::uint64_t seed)
{
    PlanarPath p;
    p.origin = PathOrigin::plain_bm;
    p.chart = Chart::planar;
    p.seed = seed;
    p.stream = 77;
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        p.vertices.push_back(pts[i]);
        p.times.push_back(static_cast<double>(i));
        p.states.push_back({pts[i].real(), pts[i].imag(), 0, 0});
    }
    p.refinement_depth.assign(p.segment_count(), 0);
    return p;
}

//! Midpoints of all pieces down to the given depth, in time order
std::vector<std::pair<double, Point>> refine_to(PlanarPath const& p, int depth)
{
    std::vector<std::pair<double, Point>> out;
    traverse_path(
        p, [&](SegmentView const& v) { return v.depth < depth ? Visit::split : Visit::leaf; },
        [&](SegmentView const& v) {
            out.emplace_back(v.ta, v.pa);
            return false;
        });
    return out;
}
}  // namespace

TEST(Bes3, SquaredNormIsChiSquare3)
{
    RngStream r(1, 0);
    std::vector<double> v;
    for (int i = 0; i < 5000; ++i)
    {
        Bes3State s;
        for (int k = 0; k < 4; ++k)
        {
            s = step_bes3(s, 0.25, r);
        }
        ASSERT_DOUBLE_EQ(s.time, 1.0);
        v.push_back(s.norm() * s.norm());
    }
    auto t = stats::ks_test(v, [](double x) {
        return x <= 0 ? 0.0 : boost::math::gamma_p(1.5, x / 2);
    });
    EXPECT_GT(t.p_value, 0.001);
}

TEST(Bes3, RejectsBadStep)
{
    RngStream r(1, 0);
    EXPECT_THROW(step_bes3({}, 0, r), std::invalid_argument);
    EXPECT_THROW(step_planar({}, -1, r), std::invalid_argument);
}

TEST(Planar, IncrementVariance)
{
    RngStream r(2, 0);
    std::vector<double> x, y;
    for (int i = 0; i < 20000; ++i)
    {
        Point p = step_planar({1, 1}, 0.5, r);
        x.push_back(p.real() - 1);
        y.push_back(p.imag() - 1);
    }
    auto sx = stats::summarize(x);
    auto sy = stats::summarize(y);
    double tol = 4 * 0.5 * std::sqrt(2 / 20000.0);
    EXPECT_NEAR(sx.variance, 0.5, tol);
    EXPECT_NEAR(sy.variance, 0.5, tol);
    EXPECT_NEAR(stats::covariance(x, y).value, 0, 4 * 0.5 / std::sqrt(20000.0));
}

TEST(Bridge, MidpointLaw)
{
    RngStream r(3, 0);
    BridgeSegment seg{{0, 0}, {2, 1}, 4};
    std::vector<double> dx;
    for (int i = 0; i < 20000; ++i)
    {
        auto [a, b] = refine_bridge(seg, r);
        ASSERT_EQ(a.end, b.start);
        ASSERT_DOUBLE_EQ(a.duration + b.duration, 4);
        dx.push_back(a.end.real() - 1);
    }
    auto s = stats::summarize(dx);
    EXPECT_NEAR(s.mean, 0, 4 / std::sqrt(20000.0));
    EXPECT_NEAR(s.variance, 1.0, 4 * std::sqrt(2 / 20000.0));
}

TEST(LazyRefinement, PureFunctionOfPath)
{
    auto p = planar_bridge_path({{0, 0}, {1, 0}, {1, 1}}, 5);
    auto a = refine_to(p, 6);
    auto b = refine_to(p, 6);
    ASSERT_EQ(a.size(), 2u * 64u);
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        ASSERT_EQ(a[i].second, b[i].second);
    }
    // Coarser refinement sees the same nodes
    auto c = refine_to(p, 3);
    for (std::size_t i = 0; i < c.size(); ++i)
    {
        ASSERT_EQ(c[i].second, a[8 * i].second);
    }
}

TEST(LazyRefinement, TimeOrderedAndEndpointsKept)
{
    auto p = planar_bridge_path({{0, 0}, {3, 0}}, 9);
    auto a = refine_to(p, 5);
    EXPECT_EQ(a.front().second, Point(0, 0));
    for (std::size_t i = 1; i < a.size(); ++i)
    {
        ASSERT_LT(a[i - 1].first, a[i].first);
    }
}

TEST(LazyRefinement, MidpointVarianceMatchesBridge)
{
    std::vector<double> v;
    for (std::uint64_t s = 0; s < 20000; ++s)
    {
        auto p = planar_bridge_path({{0, 0}, {0, 0}}, s);
        auto [l, r] = split_view(p, root_view(p, 0));
        v.push_back(l.pb.real());
    }
    auto st = stats::summarize(v);
    EXPECT_NEAR(st.variance, 0.25, 4 * 0.25 * std::sqrt(2 / 20000.0));
}

TEST(LazyRefinement, ViewDiskContainsChildrenMostly)
{
    // Bridge excursions beyond 3.5 sigma are rare
    std::size_t outside = 0, total = 0;
    for (std::uint64_t s = 0; s < 200; ++s)
    {
        auto p = planar_bridge_path({{0, 0}, {1, 0}}, s);
        Disk d = view_disk(p, root_view(p, 0), bound_sigmas);
        for (auto const& [t, pt] : refine_to(p, 8))
        {
            ++total;
            outside += std::abs(pt - d.center) > d.radius;
        }
    }
    EXPECT_LT(static_cast<double>(outside) / total, 1e-3);
}

TEST(Polyline, ExactViews)
{
    auto p = make_polyline({{0, 0}, {1, 0}, {1, 2}});
    EXPECT_FALSE(p.refinable());
    auto v = root_view(p, 1);
    EXPECT_TRUE(v.exact);
    EXPECT_FALSE(v.can_split());
    Disk d = view_disk(p, v, 3);
    EXPECT_DOUBLE_EQ(d.radius, 1.0);
    EXPECT_EQ(d.center, Point(1, 1));
}

TEST(Polyline, TransformedScalesFrame)
{
    auto p = transformed(make_polyline({{1, 0}, {0, 1}}), {2, 0}, 3);
    EXPECT_EQ(p.vertices[0], Point(5, 0));
    EXPECT_EQ(p.vertices[1], Point(2, 3));
    EXPECT_DOUBLE_EQ(p.frame.scale, 3);
}

TEST(PointSegment, AgainstDenseSampling)
{
    RngStream r(4, 0);
    for (int i = 0; i < 200; ++i)
    {
        Point a{r.normal(), r.normal()}, b{r.normal(), r.normal()}, x{r.normal(), r.normal()};
        double brute = 1e300;
        for (int k = 0; k <= 20000; ++k)
        {
            brute = std::min(brute, std::abs(x - (a + (b - a) * (k / 20000.0))));
        }
        double d = point_segment_distance(x, a, b);
        ASSERT_LE(d, brute + 1e-12);
        ASSERT_NEAR(d, brute, 1e-3 * std::abs(b - a));
    }
    EXPECT_DOUBLE_EQ(point_segment_distance({3, 4}, {0, 0}, {0, 0}), 5);
}
