#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "bri2d/analytics.hpp"
#include "bri2d/analytics_table.hpp"
#include "bri2d/config.hpp"

using namespace bri2d;

namespace
{
constexpr double pi = std::numbers::pi;

//! Midpoint rule on [a, b]
template<class F>
double midpoint(F f, double a, double b, int n)
{
    double h = (b - a) / n, s = 0;
    for (int i = 0; i < n; ++i)
    {
        s += f(a + (i + 0.5) * h);
    }
    return s * h;
}
}  // namespace

TEST(PoissonKernel, IntegratesToOne)
{
    for (Point x : {Point{1.1, 0}, Point{2, 3}, Point{-5, 0.5}})
    {
        double m = midpoint([&](double t) { return poisson_kernel(x, std::polar(1.0, t)); },
                            0, 2 * pi, 200000);
        EXPECT_NEAR(m, 1, 1e-8);
    }
    EXPECT_THROW(poisson_kernel({0.5, 0}, {1, 0}), std::invalid_argument);
    EXPECT_THROW(poisson_kernel({2, 0}, {0.5, 0}), std::invalid_argument);
}

TEST(Ell, ClosedForm)
{
    // Mean of ln|x - z| under the entrance law is ln(|x| - 1/|x|)
    for (double r : {1.001, 1.1, std::numbers::e, 10.0, 1e4})
    {
        for (double th : {0.0, 1.0, -2.5})
        {
            auto e = ell(std::polar(r, th));
            EXPECT_NEAR(e.value, std::log(r - 1 / r), 1e-9 * std::max(1.0, std::abs(e.value)))
                << r;
            EXPECT_GE(e.tilde, 1);
        }
    }
    EXPECT_THROW(ell({1, 0}), std::invalid_argument);
}

TEST(LValue, ClosedForm)
{
    auto closed = [](Point x, Point y) {
        return std::log(std::abs(1.0 - std::conj(x) * y) / std::abs(x - y))
               / std::log(std::abs(x));
    };
    for (auto [x, y] : std::vector<std::pair<Point, Point>>{{{2, 0}, {-2, 0}},
                                                            {{1.5, 1}, {3, -1}},
                                                            {{5, 0}, {5, 0.1}},
                                                            {{1.01, 0}, {0, 4}}})
    {
        EXPECT_NEAR(L_value(x, y), closed(x, y), 1e-8) << x << " " << y;
    }
    // On the unit circle the boundary formula is the radial limit
    Point y{3, 1};
    EXPECT_NEAR(L_value({1, 0}, y), closed({1 + 1e-6, 0}, y), 1e-4);
    EXPECT_THROW(L_value({2, 0}, {2, 0}), std::invalid_argument);
    EXPECT_THROW(L_value({0.5, 0}, {2, 0}), std::invalid_argument);
}

TEST(Hitting, ClosedFormsAndLimits)
{
    double s = std::numbers::e, a = std::exp(0.5), b = std::exp(1.5);
    EXPECT_DOUBLE_EQ(hitting_prob(s, a, b), 0.75);
    EXPECT_DOUBLE_EQ(hitting_prob(a, a, b), 0);
    EXPECT_DOUBLE_EQ(hitting_prob(b, a, b), 1);
    // b -> infinity gives the escape probability
    EXPECT_NEAR(hitting_prob(s, a, 1e300), escape_prob(s, a), 1e-2);
    EXPECT_NEAR(escape_prob(std::exp(2.0), std::numbers::e), 0.5, 1e-15);
    EXPECT_NEAR(1 - hitting_prob(std::exp(2.0), std::numbers::e, std::exp(20.0)),
                1 - (1.0 * 20) / (19 * 2), 1e-15);
    EXPECT_THROW(hitting_prob(2, 3, 4), std::invalid_argument);
    EXPECT_THROW(escape_prob(2, 0.5), std::invalid_argument);
}

TEST(Hitting, HTransformHarmonic)
{
    // P(s) = ln(s/a) ln b / (ln(b/a) ln s) solves the radial generator of
    // the h-transform: f'' + f'/s + 2 f' / (s ln s) = 0
    double a = 1.5, b = 7;
    for (double s : {2.0, 3.0, 5.0})
    {
        double e = 1e-4;
        double f0 = hitting_prob(s, a, b);
        double fp = hitting_prob(s + e, a, b), fm = hitting_prob(s - e, a, b);
        double d1 = (fp - fm) / (2 * e), d2 = (fp - 2 * f0 + fm) / (e * e);
        EXPECT_NEAR(d2 + d1 / s + 2 * d1 / (s * std::log(s)), 0, 1e-5);
    }
}

TEST(Capacity, CollocationFixture)
{
    EXPECT_NEAR(capacity_collocation({3, 0}, 0.5), 0.282718840379458, 1e-12);
    // Rotation invariance
    EXPECT_NEAR(capacity_collocation(std::polar(3.0, 2.0), 0.5), 0.282718840379458, 1e-10);
}

TEST(Capacity, CollocationAgreesWithWalkOnSpheres)
{
    auto c = capacity_sampling({3, 0}, 0.5, 40000, 7);
    EXPECT_NEAR(c.value, capacity_collocation({3, 0}, 0.5), 4 * c.std_error + 1e-3);
    EXPECT_GT(c.std_error, 0);
}

TEST(Capacity, LeadingFormWithinErrorBound)
{
    for (double r : {1e-3, 1e-2, 0.05})
    {
        Point y{3, 0};
        auto lead = caphat_disk(y, r);
        double col = capacity_collocation(y, r);
        EXPECT_LE(std::abs(lead.leading_term - col), lead.error_bound) << r;
    }
    // Tiny radii through the logarithm: the leading term tends to 0
    auto c = caphat_leading_log(std::exp(2.0), 1e6, ell(Point{std::exp(2.0), 0}).value);
    EXPECT_NEAR(c.leading_term, 2 / pi * 4 / 1e6, 1e-9);
    EXPECT_EQ(c.error_bound, 0);
    EXPECT_THROW(caphat_disk({3, 0}, 2.5), std::invalid_argument);
}

TEST(Capacity, MonotoneInRadius)
{
    double prev = 0;
    for (double r : {0.01, 0.1, 0.3, 0.6, 1.0, 1.5})
    {
        double c = capacity_collocation({3, 0}, r);
        EXPECT_GT(c, prev);
        prev = c;
    }
}

TEST(CondHit, LeadingTermsAndValidation)
{
    Point y{3, 0}, x{3.1, 0};
    auto c = cond_hit_small_disk(x, y, 0.01);
    EXPECT_NEAR(c.hit + c.escape, 1, 1e-12);
    EXPECT_GT(c.hit, 0);
    EXPECT_LT(c.hit, 1);
    EXPECT_THROW(cond_hit_small_disk(x, y, 0.2), std::invalid_argument);
    EXPECT_THROW(cond_hit_small_disk({4, 0}, y, 0.01), std::invalid_argument);
}

TEST(Psi, TermsAndRadius)
{
    double xn = std::numbers::e;
    EXPECT_NEAR(r_b(1, xn, 1), std::exp(-2.0), 1e-15);
    EXPECT_NEAR(r_b(1, xn, 2), std::exp(-1.0), 1e-15);
    auto p = psi_terms(1, xn, 1, ell(Point{xn, 0}).value);
    EXPECT_NEAR(p.psi1, 1.0, 1e-12);  // |ell| < 1 here so ell_tilde = 1
    EXPECT_GT(p.psi2, 0);
    EXPECT_GT(p.psi3, 0);
    EXPECT_NEAR(p.sum(), p.psi1 + p.psi2 + p.psi3, 1e-15);
    // Psi-terms shrink as alpha grows
    auto q = psi_terms(1, xn, 50, ell(Point{xn, 0}).value);
    EXPECT_LT(q.sum(), p.sum());
    EXPECT_THROW(psi_terms(0, xn, 1, 0), std::invalid_argument);
}

TEST(Ytilde, TransformAndInverse)
{
    // Ytilde_1 > s exactly when Phi_1 > r_s
    double alpha = 2, xn = 3;
    for (double s : {0.5, 1.0, 3.0})
    {
        double r = r_b(alpha, xn, s);
        auto y = ytilde_transform(std::vector<double>{r}, alpha, xn);
        EXPECT_NEAR(y[0], s, 1e-12 * s);
    }
    auto d = ytilde_transform(std::vector<double>{0.1, 0.2, 0.5}, alpha, xn);
    for (double v : d)
    {
        EXPECT_GT(v, 0);
    }
    EXPECT_THROW(ytilde_transform(std::vector<double>{1.5}, alpha, xn), std::invalid_argument);
}

TEST(Vacancy, Probability)
{
    EXPECT_NEAR(vacancy_prob(1, 0.282718840379458), 0.4114007692346906, 1e-15);
    EXPECT_EQ(vacancy_prob(0, 1), 1);
    EXPECT_THROW(vacancy_prob(1, -1), std::invalid_argument);
}

TEST(AnnulusGreen, BoundaryZeroSymmetricHarmonic)
{
    double a = 1.2, b = 5;
    Point w{2, 0};
    for (double th : {0.3, 2.0, 3.1})
    {
        EXPECT_NEAR(annulus_green(std::polar(a, th), w, a, b), 0, 1e-12);
        EXPECT_NEAR(annulus_green(std::polar(b, th), w, a, b), 0, 1e-12);
    }
    Point z{-1.5, 2.5};
    EXPECT_NEAR(annulus_green(z, w, a, b), annulus_green(w, z, a, b), 1e-12);
    // Five-point Laplacian vanishes away from the pole
    double h = 1e-3;
    auto g = [&](Point p) { return annulus_green(p, w, a, b); };
    double lap = (g(z + h) + g(z - h) + g(z + Point{0, h}) + g(z - Point{0, h}) - 4 * g(z))
                 / (h * h);
    EXPECT_NEAR(lap, 0, 1e-5);
    // Positive inside
    EXPECT_GT(annulus_green({-2, 0}, w, a, b), 0);
    EXPECT_NEAR(annulus_green({-2, 0}, w, a, b), 0.00323004, 1e-7);
}

TEST(AnnulusGreen, LogarithmicPole)
{
    double a = 1, b = 10;
    Point w{3, 1};
    double e1 = 1e-3, e2 = 1e-5;
    double g1 = annulus_green(w + e1, w, a, b) + std::log(e1);
    double g2 = annulus_green(w + e2, w, a, b) + std::log(e2);
    EXPECT_NEAR(g1, g2, 1e-3);
}

TEST(AnnulusExit, MassesAndLimit)
{
    double s = 0.5, r = 0.05, R = 10;
    EXPECT_NEAR(annulus_inner_arc_mass(s, r, R, -pi, pi), 1, 1e-12);
    double half = annulus_inner_arc_mass(s, r, R, 0, pi);
    EXPECT_NEAR(half, 0.5, 1e-12);
    // Large R: the exterior Poisson kernel of B(r) seen from s, up to the
    // normalizing probability of exiting inside
    double big = 1e300;
    double t0 = 0.2, t1 = 1.3;
    double ref = midpoint(
        [&](double t) {
            return (s * s - r * r) / (2 * pi * std::norm(std::polar(r, t) - s));
        },
        t0, t1, 200000);
    double miss = std::log(s / r) / std::log(big / r);
    EXPECT_NEAR(annulus_inner_arc_mass(s, r, big, t0, t1), ref, 2 * miss);
    EXPECT_THROW(annulus_inner_arc_mass(0.01, r, R, 0, 1), std::invalid_argument);
}

TEST(Table, EmitsCartesianProduct)
{
    auto grid = KeyValues::parse_string("s = e\na = e^0.5\nb = e^1.5, e^2\n");
    std::ostringstream os;
    emit_table("hitting_prob", grid, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "s,a,b,probability");
    std::getline(is, line);
    EXPECT_NEAR(std::stod(line.substr(line.rfind(',') + 1)), 0.75, 1e-15) << line;
    int rows = 1;
    while (std::getline(is, line))
    {
        ++rows;
    }
    EXPECT_EQ(rows, 2);
    EXPECT_THROW(emit_table("nope", grid, os), std::invalid_argument);
    grid.set("junk", "1");
    EXPECT_THROW(emit_table("hitting_prob", grid, os), std::invalid_argument);
}

TEST(Table, EveryOperationEvaluates)
{
    std::map<std::string, std::string> grids = {
        {"poisson_kernel", "x_re = 2\nx_im = 0\ntheta = 0, 1"},
        {"ell", "x_re = 3\nx_im = 0"},
        {"caphat_disk", "y_re = 3\ny_im = 0\nr = 0.5"},
        {"caphat_leading_log", "y_norm = e^2\nlog_inv_r = 10"},
        {"hitting_prob", "s = 2\na = 1.5\nb = 3"},
        {"escape_prob", "s = 3\na = 2"},
        {"cond_hit_small_disk", "x_re = 3.1\nx_im = 0\ny_re = 3\ny_im = 0\nr = 0.01"},
        {"L_value", "x_re = 2\nx_im = 0\ny_re = -2\ny_im = 0"},
        {"psi_terms", "h = 1\nx_norm = e\nalpha = 1"},
        {"r_b", "alpha = 1\nx_norm = e\nb = 1"},
        {"vacancy_prob", "alpha = 1\ncaphat = 0.3"},
    };
    EXPECT_EQ(grids.size(), table_ops().size());
    for (auto const& [op, text] : grids)
    {
        std::ostringstream os;
        EXPECT_NO_THROW(emit_table(op, KeyValues::parse_string(text), os)) << op;
        EXPECT_EQ(os.str().find("nan"), std::string::npos) << op;
    }
}

TEST(Config, ParsesNumbersAndLists)
{
    auto kv = KeyValues::parse_string(
        "# comment\nalpha = 2.5\nx = e\ny = e^-2  # trailing\nlist = 1, 2,3\nflag = yes\n");
    EXPECT_EQ(kv.number("alpha"), 2.5);
    EXPECT_EQ(kv.number("x"), std::numbers::e);
    EXPECT_NEAR(kv.number("y"), std::exp(-2.0), 1e-16);
    EXPECT_EQ(kv.list("list"), (std::vector<double>{1, 2, 3}));
    EXPECT_TRUE(kv.flag("flag", false));
    EXPECT_EQ(kv.number("missing", 7), 7);
    EXPECT_THROW(kv.number("missing"), std::invalid_argument);
    EXPECT_THROW(KeyValues::parse_string("novalue\n"), std::invalid_argument);
    EXPECT_THROW(KeyValues::parse_string("a = 1x\n").number("a"), std::invalid_argument);
}
