#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "bri2d/analytics.hpp"
#include "bri2d/conditioned.hpp"
#include "bri2d/parallel.hpp"
#include "bri2d/stats.hpp"

using namespace bri2d;

namespace
{
StopSpec annulus(double a, double b)
{
    StopSpec s;
    s.inner_radius = a;
    s.outer_radius = b;
    return s;
}

//! Fraction of paths leaving through the outer circle
double outer_fraction(std::size_t n, double s, double a, double b, bool euler)
{
    auto res = parallel_map(n, default_workers(), [&](std::size_t i) {
        RngStream rng(99, derive_stream(euler ? 2 : 1, i));
        StopReason why{};
        if (euler)
        {
            EulerOptions eo;
            eo.relative_step = true;
            sample_conditioned_path_euler({s, 0}, annulus(a, b), 1.0 / 4096, rng, eo,
                                          &why);
        }
        else
        {
            sample_conditioned_path_skew({s, 0}, annulus(a, b), 1.0 / 64, rng, {}, &why);
        }
        return why == StopReason::outer ? 1 : 0;
    });
    double k = 0;
    for (int v : res)
    {
        k += v;
    }
    return k / static_cast<double>(n);
}
}  // namespace

TEST(Drift, IsLogGradientOfH)
{
    // h(x) = ln|x|; drift = grad h / h by central differences
    auto h = [](Point x) { return std::log(std::abs(x)); };
    for (Point x : {Point{1.5, 0.3}, Point{-3, 2}, Point{0.2, -7}})
    {
        double e = 1e-6;
        Point g{(h(x + Point{e, 0}) - h(x - Point{e, 0})) / (2 * e),
                (h(x + Point{0, e}) - h(x - Point{0, e})) / (2 * e)};
        Point d = conditioned_drift(x);
        EXPECT_NEAR(d.real(), g.real() / h(x), 1e-7);
        EXPECT_NEAR(d.imag(), g.imag() / h(x), 1e-7);
    }
}

TEST(Skew, StopsOnTheStopCircles)
{
    for (std::uint64_t i = 0; i < 50; ++i)
    {
        RngStream rng(5, i);
        StopReason why{};
        auto p = sample_conditioned_path_skew({2, 1}, annulus(1.5, 4), 1.0 / 64, rng, {},
                                              &why);
        ASSERT_EQ(p.vertices.front(), Point(2, 1));
        double end = std::abs(p.vertices.back());
        if (why == StopReason::inner)
        {
            EXPECT_NEAR(end, 1.5, 1e-9);
        }
        else
        {
            ASSERT_EQ(why, StopReason::outer);
            EXPECT_NEAR(end, 4, 1e-9);
        }
        for (std::size_t k = 1; k + 1 < p.vertices.size(); ++k)
        {
            double m = std::abs(p.vertices[k]);
            ASSERT_GT(m, 1.5 - 1e-9);
            ASSERT_LT(m, 4 + 1e-9);
        }
        EXPECT_TRUE(p.refinable());
    }
}

TEST(Skew, Reproducible)
{
    RngStream a(8, 1), b(8, 1);
    auto p = sample_conditioned_path_skew({3, 0}, annulus(2, 6), 1.0 / 32, a);
    auto q = sample_conditioned_path_skew({3, 0}, annulus(2, 6), 1.0 / 32, b);
    ASSERT_EQ(p.vertices.size(), q.vertices.size());
    EXPECT_EQ(p.vertices.back(), q.vertices.back());
}

TEST(Skew, NeverEntersUnitDisk)
{
    StopSpec out;
    out.outer_radius = 50;
    for (std::uint64_t i = 0; i < 100; ++i)
    {
        RngStream rng(6, i);
        auto p = sample_conditioned_path_skew({1.0, 0}, out, 1.0 / 64, rng);
        for (auto v : p.vertices)
        {
            ASSERT_GE(std::abs(v), 1 - 1e-12);
        }
    }
}

TEST(Skew, HittingProbability)
{
    double s = std::numbers::e, a = std::exp(0.5), b = std::exp(1.5);
    std::size_t n = 3000;
    double p = outer_fraction(n, s, a, b, false);
    double cmp = hitting_prob(s, a, b);
    EXPECT_NEAR(cmp, 0.75, 1e-15);
    EXPECT_NEAR(p, cmp, 4 * std::sqrt(cmp * (1 - cmp) / n) + 0.01);
}

TEST(Euler, HittingProbability)
{
    double s = std::numbers::e, a = std::exp(0.5), b = std::exp(1.5);
    std::size_t n = 1500;
    double p = outer_fraction(n, s, a, b, true);
    EXPECT_NEAR(p, 0.75, 4 * std::sqrt(0.75 * 0.25 / n) + 0.02);
}

TEST(Euler, RefusesNearUnitCircle)
{
    RngStream rng(1, 1);
    EXPECT_THROW(sample_conditioned_path_euler({1.01, 0}, annulus(1.5, 3), 0.01, rng),
                 std::invalid_argument);
}

TEST(StopRules, Validation)
{
    RngStream rng(1, 1);
    EXPECT_THROW(sample_conditioned_path_skew({2, 0}, StopSpec{}, 0.01, rng),
                 std::invalid_argument);
    EXPECT_THROW(sample_conditioned_path_skew({2, 0}, annulus(0.5, 3), 0.01, rng),
                 std::invalid_argument);
    EXPECT_THROW(sample_conditioned_path_skew({2, 0}, annulus(3, 2), 0.01, rng),
                 std::invalid_argument);
    EXPECT_THROW(sample_conditioned_path_skew({0.5, 0}, annulus(1, 2), 0.01, rng),
                 std::invalid_argument);
    EXPECT_THROW(sample_conditioned_path_skew({2, 0}, annulus(1, 3), 0, rng),
                 std::invalid_argument);
}

TEST(Scaled, AvoidsShiftedDisk)
{
    Point c{5, -1};
    for (std::uint64_t i = 0; i < 30; ++i)
    {
        RngStream rng(7, i);
        StopSpec st;
        st.outer_radius = 3.0;
        auto p = sample_scaled_conditioned(c, 0.5, c + Point{0.5, 0}, st, rng);
        EXPECT_EQ(p.vertices.front(), (c + Point{0.5, 0}));
        EXPECT_NEAR(std::abs(p.vertices.back() - c), 3.0, 1e-9);
        for (auto v : p.vertices)
        {
            ASSERT_GE(std::abs(v - c), 0.5 * (1 - 1e-9));
        }
    }
}

TEST(FirstHit, StraightLine)
{
    auto p = make_polyline({{0, 0}, {4, 0}, {4, 4}});
    auto h = first_hit_radius(p, {0, 0}, 2);
    ASSERT_TRUE(h);
    EXPECT_EQ(h->first, 0u);
    EXPECT_NEAR(std::abs(h->second - Point(2, 0)), 0, 1e-15);
    EXPECT_FALSE(first_hit_radius(p, {0, 0}, 10));
}

TEST(Entrance, AnglesOnTheSmallCircle)
{
    RngStream rng(3, 3);
    int got = 0;
    for (int i = 0; i < 200; ++i)
    {
        auto th = sample_entrance_angle(0.05, 10, 0.5, rng);
        got += th.has_value();
        if (th)
        {
            ASSERT_LE(std::abs(*th), std::numbers::pi);
        }
    }
    EXPECT_GT(got, 0);
}

TEST(Entrance, MatchesExactAnnulusLaw)
{
    auto h = estimate_entrance_angle_law(0.2, 4, 0.5, 6000, 11, 0, 8);
    std::vector<double> probs;
    for (int k = 0; k < 8; ++k)
    {
        double w = 2 * std::numbers::pi / 8;
        probs.push_back(annulus_inner_arc_mass(0.5, 0.2, 4, k * w, (k + 1) * w));
    }
    EXPECT_EQ(h.accepted, 6000u);
    EXPECT_GT(stats::chi_square_gof(h.counts, probs).p_value, 0.001);
    // The law is far from uniform when the disk is large relative to s
    EXPECT_LT(stats::chi_square_uniform(h.counts).p_value, 1e-6);
}

TEST(Entrance, Validation)
{
    EXPECT_THROW(estimate_entrance_angle_law(0.3, 4, 0.5, 10, 1, 0), std::invalid_argument);
    EXPECT_THROW(estimate_entrance_angle_law(0.1, 4, 0.5, 10, 1, 0, 0),
                 std::invalid_argument);
}
