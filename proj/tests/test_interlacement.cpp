#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "bri2d/analytics.hpp"
#include "bri2d/field_io.hpp"
#include "bri2d/geometry.hpp"
#include "bri2d/interlacement.hpp"
#include "bri2d/parallel.hpp"
#include "bri2d/stats.hpp"

using namespace bri2d;

namespace
{
//! The part of a path after its first vertex at modulus >= c
PlanarPath suffix_from(PlanarPath const& p, double c)
{
    std::size_t k = 0;
    while (k < p.vertices.size() && std::abs(p.vertices[k]) < c)
    {
        ++k;
    }
    PlanarPath q = p;
    auto cut = static_cast<std::ptrdiff_t>(k);
    q.vertices.erase(q.vertices.begin(), q.vertices.begin() + cut);
    q.states.erase(q.states.begin(), q.states.begin() + cut);
    q.times.erase(q.times.begin(), q.times.begin() + cut);
    q.refinement_depth.erase(q.refinement_depth.begin(),
                             q.refinement_depth.begin() + cut);
    q.segment_keys.clear();
    return q;
}
}  // namespace

TEST(Scales, PoissonCountAndOrder)
{
    // Mean count 2 alpha ln(cap / b)
    double alpha = 1.5, b = 1, cap = std::exp(2.0);
    std::vector<double> n;
    for (std::uint64_t i = 0; i < 4000; ++i)
    {
        RngStream r(1, i);
        auto s = sample_scales(alpha, b, cap, r);
        n.push_back(static_cast<double>(s.size()));
        for (std::size_t k = 0; k < s.size(); ++k)
        {
            ASSERT_EQ(s[k].index, k);
            ASSERT_GE(s[k].rho, b);
            ASSERT_LE(s[k].rho, cap);
            ASSERT_GT(s[k].mark, 0);
            ASSERT_LE(s[k].mark, 2 * alpha / s[k].rho);
            if (k)
            {
                ASSERT_GT(s[k].rho, s[k - 1].rho);
            }
        }
    }
    auto st = stats::summarize(n);
    double mean = 2 * alpha * 2;
    EXPECT_NEAR(st.mean, mean, 4 * std::sqrt(mean / 4000));
    EXPECT_NEAR(st.variance, mean, 0.1 * mean);
}

TEST(Scales, FirstScaleExponential)
{
    // 2 alpha ln(rho_1 / b) is Exp(1)
    std::vector<double> v;
    for (std::uint64_t i = 0; i < 5000; ++i)
    {
        RngStream r(2, i);
        auto s = sample_scales(0.7, 1, 1e12, r);
        ASSERT_FALSE(s.empty());
        v.push_back(2 * 0.7 * std::log(s[0].rho));
    }
    EXPECT_GT(stats::ks_exponential(v).p_value, 0.001);
}

TEST(Scales, NestedLevelsThinCorrectly)
{
    // Level alpha keeps a Poisson process of intensity 2 alpha / rho
    double amax = 4, alpha = 1, cap = std::exp(3.0);
    std::vector<double> n;
    for (std::uint64_t i = 0; i < 3000; ++i)
    {
        RngStream r(3, i);
        auto s = sample_scales(amax, 1, cap, r);
        n.push_back(static_cast<double>(
            std::count_if(s.begin(), s.end(), [&](auto const& p) { return p.in_level(alpha); })));
    }
    auto st = stats::summarize(n);
    EXPECT_NEAR(st.mean, 2 * alpha * 3, 4 * std::sqrt(6.0 / 3000));
}

TEST(Scales, Validation)
{
    RngStream r(1, 1);
    EXPECT_THROW(sample_scales(0, 1, 2, r), std::invalid_argument);
    EXPECT_THROW(sample_scales(1, 0, 2, r), std::invalid_argument);
    EXPECT_TRUE(sample_scales(1, 2, 1, r).empty());
}

TEST(Moustache, AnchoredOnUnitCircleAndOutside)
{
    for (std::uint64_t i = 0; i < 20; ++i)
    {
        RngStream r(4, i);
        auto m = sample_moustache(5, r);
        Point anchor = std::polar(1.0, m.anchor_angle);
        EXPECT_NEAR(std::abs(m.branch_pos.vertices.front() - anchor), 0, 1e-12);
        EXPECT_NEAR(std::abs(m.branch_neg.vertices.front() - anchor), 0, 1e-12);
        EXPECT_NEAR(std::abs(m.branch_pos.vertices.back()), 5 * std::exp(4.0), 1e-6);
        for (auto const* p : {&m.branch_pos, &m.branch_neg})
        {
            for (auto v : p->vertices)
            {
                ASSERT_GE(std::abs(v), 1 - 1e-12);
            }
        }
        auto s = scaled(m, 3);
        EXPECT_NEAR(std::abs(s.branch_neg.vertices.front()), 3, 1e-12);
        EXPECT_NEAR(path_min_modulus(s.branch_pos), 3 * path_min_modulus(m.branch_pos), 1e-8);
    }
    RngStream r(1, 1);
    EXPECT_THROW(sample_moustache(1, r), std::invalid_argument);
}

TEST(Moustache, ReturnsRestoreTheHittingLaw)
{
    // After reaching radius c the untruncated branch goes below radius a
    // with probability ln a / ln c; without returns only the part before
    // the stop at e^4 E counts
    double E = std::exp(2.0), c = std::exp(1.8), a = std::numbers::e;
    std::size_t n = 2000;
    auto run = [&](bool returns) {
        FieldOptions o;
        o.coarse_dr = 1.0 / 64;
        o.returns = returns;
        auto hits = parallel_map(n, default_workers(), [&](std::size_t i) {
            RngStream r(12, i);
            auto m = sample_moustache(E, r, o);
            auto q = suffix_from(m.branch_pos, c);
            return q.vertices.size() > 1 && path_min_modulus(q, 1e-6) < a ? 1 : 0;
        });
        double k = 0;
        for (int h : hits)
        {
            k += h;
        }
        return k / static_cast<double>(n);
    };
    double exact = 1 / 1.8;
    double sigma = std::sqrt(exact * (1 - exact) / n);
    EXPECT_NEAR(run(true), exact, 4 * sigma);
    // Bes(3) from 1.8 reaches 1 before 6 with a smaller probability
    double truncated = (1 / 1.8 - 1 / 6.0) / (1 - 1 / 6.0);
    EXPECT_NEAR(run(false), truncated, 4 * sigma);
}

TEST(Moustache, ReturnConnectorStaysOutside)
{
    for (std::uint64_t i = 0; i < 200; ++i)
    {
        RngStream r(13, i);
        auto m = sample_moustache(2, r);
        for (auto const* p : {&m.branch_pos, &m.branch_neg})
        {
            EXPECT_NEAR(std::abs(p->vertices.back()), 2 * std::exp(4.0), 1e-6);
            for (std::size_t k = 0; k + 1 < p->times.size(); ++k)
            {
                if (p->times[k + 1] == p->times[k])
                {
                    ASSERT_GE(std::abs(p->vertices[k + 1]), 2 * (1 - 1e-9));
                }
            }
        }
    }
}

TEST(Field, RestrictIsNested)
{
    auto f = assemble_field(3, 1, 4, RngStream(5, 0));
    auto a = f.restrict(1);
    auto b = f.restrict(2);
    auto c = f.restrict(3);
    EXPECT_EQ(c.size(), f.entries.size());
    EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    EXPECT_TRUE(std::includes(c.begin(), c.end(), b.begin(), b.end()));
    EXPECT_THROW(f.restrict(4), std::invalid_argument);
    EXPECT_THROW(f.restrict(0), std::invalid_argument);
}

TEST(Field, ReproducibleAndStreamLocal)
{
    auto f = assemble_field(1, 1, 3, RngStream(6, 1));
    auto g = assemble_field(1, 1, 3, RngStream(6, 1));
    ASSERT_EQ(f.entries.size(), g.entries.size());
    for (std::size_t i = 0; i < f.entries.size(); ++i)
    {
        EXPECT_EQ(f.entries[i].scale.rho, g.entries[i].scale.rho);
        EXPECT_EQ(f.entries[i].moustache.branch_pos.vertices,
                  g.entries[i].moustache.branch_pos.vertices);
    }
    // A wider window keeps the scales already drawn
    auto h = assemble_field(1, 1, 6, RngStream(6, 1));
    for (std::size_t i = 0; i < f.entries.size(); ++i)
    {
        EXPECT_EQ(f.entries[i].scale.rho, h.entries[i].scale.rho);
    }
}

TEST(Field, Validation)
{
    RngStream r(1, 1);
    EXPECT_THROW(assemble_field(0, 1, 2, r), std::invalid_argument);
    EXPECT_THROW(assemble_field(1, 0, 2, r), std::invalid_argument);
    EXPECT_THROW(assemble_field(1, 1, 0.5, r), std::invalid_argument);
    EXPECT_THROW(assemble_field_bessel(1, 2, 1.5, r), std::invalid_argument);
}

TEST(Field, ProbeValidation)
{
    auto f = assemble_field(1, 1, 3, RngStream(7, 0));
    EXPECT_THROW(count_hitting(f, 1, {2, 0}, 1e-4), std::invalid_argument);
    EXPECT_THROW(count_annulus_trajectories(f, 1, {2, 0}, 0.5, 2), std::invalid_argument);
    EXPECT_THROW(count_annulus_trajectories(f, 1, {2, 0}, 0.5, 0.2), std::invalid_argument);
    EXPECT_EQ(count_annulus_trajectories(f, 1, {2, 0}, 0.3, 0.3), 0u);
}

TEST(Field, HittingCountMonotoneInRadius)
{
    for (std::uint64_t i = 0; i < 20; ++i)
    {
        auto f = assemble_field(2, 1, 3, RngStream(8, i));
        std::size_t prev = 0;
        for (double r : {0.05, 0.1, 0.3, 0.6, 0.9})
        {
            auto n = count_hitting(f, 2, {2, 0}, r);
            ASSERT_GE(n, prev);
            prev = n;
        }
        ASSERT_LE(count_hitting(f, 1, {2, 0}, 0.9), count_hitting(f, 2, {2, 0}, 0.9));
    }
}

TEST(Field, VacancyMatchesCapacity)
{
    // P[B(y, r) vacant] = exp(-pi alpha caphat)
    Point y{3, 0};
    double r = 0.5;
    std::size_t n = 600;
    auto hits = parallel_map(n, default_workers(), [&](std::size_t i) {
        auto f = assemble_field(1, 1, 3.5, RngStream(9, i));
        return count_hitting(f, 1, y, r) == 0 ? 1 : 0;
    });
    double p = 0;
    for (int h : hits)
    {
        p += h;
    }
    p /= static_cast<double>(n);
    double cmp = vacancy_prob(1, capacity_collocation(y, r));
    EXPECT_NEAR(p, cmp, 4 * std::sqrt(cmp * (1 - cmp) / n));
}

TEST(Bessel, ScalesAndAnchors)
{
    auto f = assemble_field_bessel(2, 1, 5, RngStream(10, 0));
    EXPECT_EQ(f.construction, Construction::bessel);
    for (std::size_t k = 0; k < f.entries.size(); ++k)
    {
        auto const& e = f.entries[k];
        if (k)
        {
            ASSERT_GE(e.scale.rho, f.entries[k - 1].scale.rho);
        }
        Point anchor = std::polar(e.scale.rho, e.moustache.anchor_angle);
        EXPECT_NEAR(std::abs(e.moustache.branch_pos.vertices.front() - anchor), 0,
                    1e-9 * e.scale.rho);
        EXPECT_GE(path_min_modulus(e.moustache.branch_neg), e.scale.rho * (1 - 1e-9));
    }
}

TEST(FieldIo, RoundTrip)
{
    auto f = assemble_field(2, 1, 3, RngStream(11, 4));
    std::stringstream ss;
    write_field(ss, f);
    auto g = read_field(ss);
    EXPECT_EQ(g.alpha_max, f.alpha_max);
    EXPECT_EQ(g.window_radius, f.window_radius);
    EXPECT_EQ(g.seed, f.seed);
    EXPECT_EQ(g.construction, f.construction);
    ASSERT_EQ(g.entries.size(), f.entries.size());
    for (std::size_t i = 0; i < f.entries.size(); ++i)
    {
        EXPECT_EQ(g.entries[i].scale.mark, f.entries[i].scale.mark);
        EXPECT_EQ(g.entries[i].moustache.branch_neg.states,
                  f.entries[i].moustache.branch_neg.states);
    }
    // Lazy refinement of the loaded field sees the same sub-paths
    for (Point x : {Point{1.5, 0.5}, Point{-2, 1}, Point{0, -2.2}})
    {
        auto a = distance_profile(f, 2, x, 3, 1.0);
        auto b = distance_profile(g, 2, x, 3, 1.0);
        EXPECT_EQ(a.distances, b.distances);
    }
}

TEST(FieldIo, RejectsGarbage)
{
    std::stringstream a("not a field\n");
    EXPECT_THROW(read_field(a), std::runtime_error);
    auto f = assemble_field(1, 1, 2, RngStream(1, 1));
    std::stringstream ss;
    write_field(ss, f);
    auto s = ss.str();
    std::stringstream cut(s.substr(0, s.size() - 9));
    if (!f.entries.empty())
    {
        EXPECT_THROW(read_field(cut), std::runtime_error);
    }
}
