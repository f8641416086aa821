#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rng.hpp"
#include "stochastic.hpp"

namespace bri2d
{
//---------------------------------------------------------------------------//
// QUADRATURE
//---------------------------------------------------------------------------//
enum class QuadratureRule : std::uint8_t
{
    gauss_kronrod,  //!< adaptive 15-point Gauss-Kronrod on each panel
    trapezoid  //!< composite trapezoid (spectral for periodic integrands)
};

/*!
 * Integration settings.
 *
 * For Gauss-Kronrod, nodes is the number of equal panels between
 * breakpoints before adaptive bisection; for the trapezoid it is the number
 * of nodes.
 */
struct QuadratureSpec
{
    std::size_t nodes{4};
    QuadratureRule rule{QuadratureRule::gauss_kronrod};
    double tolerance{1e-10};
    unsigned max_depth{12};
};

//! Integral of f over [a, b], split at the given interior breakpoints
template<class F>
double integrate(F&& f, double a, double b, std::vector<double> breaks,
                 QuadratureSpec const& q)
{
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                                [&](double t) { return t < a || t > b; }),
                 breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    double total = 0;
    std::size_t panels = std::max<std::size_t>(q.nodes, 1);
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k)
    {
        double lo = breaks[k];
        double hi = breaks[k + 1];
        if (q.rule == QuadratureRule::trapezoid)
        {
            double h = (hi - lo) / static_cast<double>(panels);
            double s = 0.5 * (f(lo) + f(hi));
            for (std::size_t i = 1; i < panels; ++i)
            {
                s += f(lo + h * static_cast<double>(i));
            }
            total += s * h;
            continue;
        }
        double h = (hi - lo) / static_cast<double>(panels);
        for (std::size_t i = 0; i < panels; ++i)
        {
            double error = 0;
            total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
                f, lo + h * static_cast<double>(i),
                i + 1 == panels ? hi : lo + h * static_cast<double>(i + 1),
                q.max_depth, q.tolerance, &error);
        }
    }
    return total;
}

//! Breakpoints clustering geometrically toward 0 on (0, pi)
inline std::vector<double> log_breaks(double scale)
{
    std::vector<double> out;
    for (double t = scale; t < std::numbers::pi; t *= 8)
    {
        out.push_back(t);
    }
    return out;
}

//---------------------------------------------------------------------------//
// POISSON KERNEL AND ELL
//---------------------------------------------------------------------------//
//! Density of the entrance law into B(1) from x at z on the unit circle
inline double poisson_kernel(Point x, Point z)
{
    double ax = std::abs(x);
    if (!(ax > 1))
    {
        throw std::invalid_argument("poisson_kernel: need |x| > 1");
    }
    if (std::abs(std::abs(z) - 1) > 1e-9)
    {
        throw std::invalid_argument("poisson_kernel: z must lie on the unit "
                                    "circle");
    }
    return (ax * ax - 1) / (2 * std::numbers::pi * std::norm(z - x));
}

struct EllValue
{
    double value{0};
    double tilde{1};  //!< max(|value|, 1)
};

/*!
 * Mean of ln|x - z| under the entrance law into B(1) from x.
 *
 * The integration variable is the angle of z, with breakpoints
 * accumulating at arg x where the kernel peaks.
 */
inline EllValue ell(Point x, QuadratureSpec const& q = {})
{
    double ax = std::abs(x);
    if (!(ax > 1))
    {
        throw std::invalid_argument("ell: need |x| > 1");
    }
    double th0 = std::arg(x);
    double pref = (ax * ax - 1) / (2 * std::numbers::pi);
    double gap = ax - 1;
    auto f = [&](double t) {
        double s = std::sin(0.5 * (t - th0));
        double d2 = gap * gap + 4 * ax * s * s;
        return pref * 0.5 * std::log(d2) / d2;
    };
    std::vector<double> br;
    for (double b : log_breaks(ax - 1))
    {
        br.push_back(th0 + b);
        br.push_back(th0 - b);
    }
    br.push_back(th0);
    double v = integrate(f, th0 - std::numbers::pi, th0 + std::numbers::pi, br, q);
    return {v, std::max(std::abs(v), 1.0)};
}

//---------------------------------------------------------------------------//
// CAPACITY
//---------------------------------------------------------------------------//
enum class CapacityMethod : std::uint8_t
{
    leading_form,
    collocation,  //!< multipole least-squares solve of the exterior problem
    harmonic_sampling  //!< walk-on-spheres estimate from a far circle
};

inline char const* to_string(CapacityMethod m)
{
    switch (m)
    {
        case CapacityMethod::leading_form: return "leading_form";
        case CapacityMethod::collocation: return "collocation";
        case CapacityMethod::harmonic_sampling: return "harmonic_sampling";
    }
    return "unknown";
}

struct CapacityResult
{
    double value{0};
    double leading_term{0};
    double error_bound{0};  //!< O-terms with constant 1 (unproven constant)
    CapacityMethod method{CapacityMethod::leading_form};
    double std_error{0};  //!< sampling standard error, if any
};

/*!
 * Leading form of caphat(B(y, r)) with log(1/r) given directly, so radii
 * far below the double range can be used.
 */
inline CapacityResult caphat_leading_log(double y_norm, double log_inv_r,
                                         double ell_y)
{
    double ly = std::log(y_norm);
    double num = ly * ly;
    double den = log_inv_r + ell_y + ly;
    CapacityResult c;
    c.method = CapacityMethod::leading_form;
    c.leading_term = 2 / std::numbers::pi * num / den;
    c.value = c.leading_term;
    // r = exp(-log_inv_r); the O-terms vanish when r underflows
    double log_r = -log_inv_r;
    double r = std::exp(log_r);
    double e_num = r * (1 + std::abs(log_r) + ly) * ly / y_norm;
    double e_den = r / (y_norm - 1) * (std::log(y_norm - 1) + log_inv_r);
    e_den = std::abs(e_den);
    if (den - e_den <= 0)
    {
        c.error_bound = std::numeric_limits<double>::infinity();
        return c;
    }
    double hi = 2 / std::numbers::pi * (num + e_num) / (den - e_den);
    double lo = 2 / std::numbers::pi * (num - e_num) / (den + e_den);
    c.error_bound = std::max(hi - c.leading_term, c.leading_term - lo);
    return c;
}

/*!
 * Capacity of B(1) u B(y, r) from the exterior Green function.
 *
 * u(z) = q ln|z| + (1 - q) ln|z - y| + gamma + Re sum a_n z^-n
 *        + Re sum b_n (r / (z - y))^n
 * vanishes on both circles in the least-squares sense; then
 * u = ln|z| + gamma + o(1) at infinity and caphat = -(2/pi) gamma.
 */
inline double capacity_collocation(Point y, double r, int terms = 48)
{
    int m = 4 * terms;
    int cols = 2 + 4 * terms;
    Eigen::MatrixXd a(2 * m, cols);
    Eigen::VectorXd rhs(2 * m);
    for (int c = 0; c < 2; ++c)
    {
        for (int k = 0; k < m; ++k)
        {
            double th = 2 * std::numbers::pi * (k + 0.5) / m;
            Point z = c == 0 ? std::polar(1.0, th) : y + std::polar(r, th);
            int row = c * m + k;
            double lz = std::log(std::abs(z));
            double lzy = std::log(std::abs(z - y));
            a(row, 0) = lz - lzy;
            a(row, 1) = 1.0;
            Point zi = 1.0 / z;
            Point wi = r / (z - y);
            Point zp = 1, wp = 1;
            for (int n = 1; n <= terms; ++n)
            {
                zp *= zi;
                wp *= wi;
                a(row, 4 * n - 2) = zp.real();
                a(row, 4 * n - 1) = -zp.imag();
                a(row, 4 * n) = wp.real();
                a(row, 4 * n + 1) = -wp.imag();
            }
            rhs(row) = -lzy;
        }
    }
    Eigen::VectorXd sol = a.colPivHouseholderQr().solve(rhs);
    return -2 / std::numbers::pi * sol(1);
}

//! Sample a point of the circle of radius big hit first from z (|z| > big)
inline Point exterior_return(Point z, double big, RngStream& rng)
{
    double rho = big / std::abs(z);
    double u = rng.uniform();
    double phi = std::arg(z)
                 + 2 * std::atan((1 - rho) / (1 + rho)
                                 * std::tan(std::numbers::pi * (u - 0.5)));
    return std::polar(big, phi);
}

/*!
 * Monte Carlo capacity of B(1) u B(y, r): mean of (2/pi) ln|entry| over
 * walkers started uniformly on a far circle.
 */
inline CapacityResult capacity_sampling(Point y, double r, std::size_t walkers,
                                        std::uint64_t seed,
                                        double launch = 1e3, double eps = 1e-9)
{
    double sum = 0, sum2 = 0;
    for (std::size_t w = 0; w < walkers; ++w)
    {
        RngStream rng(seed, w);
        Point z = std::polar(launch, rng.angle());
        double value = 0;
        for (;;)
        {
            if (std::abs(z) > launch)
            {
                z = exterior_return(z, launch, rng);
            }
            double d1 = std::abs(z) - 1;
            double d2 = std::abs(z - y) - r;
            if (d1 <= eps)
            {
                value = 0;
                break;
            }
            if (d2 <= eps * r)
            {
                Point entry = y + r * (z - y) / std::abs(z - y);
                value = std::log(std::abs(entry));
                break;
            }
            z += std::polar(std::min(d1, d2), rng.angle());
        }
        sum += value;
        sum2 += value * value;
    }
    double n = static_cast<double>(walkers);
    double mean = sum / n;
    double var = std::max(0.0, sum2 / n - mean * mean) * n / (n - 1);
    CapacityResult c;
    c.method = CapacityMethod::harmonic_sampling;
    c.value = 2 / std::numbers::pi * mean;
    c.std_error = 2 / std::numbers::pi * std::sqrt(var / n);
    return c;
}

struct SamplingSettings
{
    std::size_t walkers{1000000};
    std::uint64_t seed{20240501};
};

//! caphat(B(y, r)) = cap(B(1) u B(y, r)) with the small-disk error terms
inline CapacityResult caphat_disk(Point y, double r,
                                  CapacityMethod method = CapacityMethod::leading_form,
                                  QuadratureSpec const& q = {},
                                  SamplingSettings const& sampling = {})
{
    double ay = std::abs(y);
    if (!(r > 0) || !(r < ay - 1))
    {
        throw std::invalid_argument("caphat_disk: need 0 < r < |y| - 1");
    }
    double l = ell(y, q).value;
    CapacityResult lead = caphat_leading_log(ay, -std::log(r), l);
    if (method == CapacityMethod::leading_form)
    {
        return lead;
    }
    CapacityResult c = method == CapacityMethod::collocation
                           ? CapacityResult{capacity_collocation(y, r), 0, 0,
                                            CapacityMethod::collocation, 0}
                           : capacity_sampling(y, r, sampling.walkers,
                                               sampling.seed);
    c.leading_term = lead.leading_term;
    c.error_bound = lead.error_bound;
    return c;
}

//---------------------------------------------------------------------------//
// HITTING AND ESCAPE
//---------------------------------------------------------------------------//
//! P[conditioned motion from radius s reaches b before a]
inline double hitting_prob(double s, double a, double b)
{
    if (!(1 < a && a <= s && s <= b && a < b))
    {
        throw std::invalid_argument("hitting_prob: need 1 < a <= s <= b");
    }
    return std::log(s / a) * std::log(b) / (std::log(b / a) * std::log(s));
}

//! P[conditioned motion from radius s never reaches radius a]
inline double escape_prob(double s, double a)
{
    if (!(1 <= a && a <= s) || !(s > 1))
    {
        throw std::invalid_argument("escape_prob: need 1 <= a <= s, s > 1");
    }
    return 1 - std::log(a) / std::log(s);
}

struct CondHitResult
{
    double hit{0};  //!< leading term of the hitting probability
    double escape{0};  //!< leading term of the escape probability
    double hit_error_bound{0};  //!< relative O-term times hit (constant 1)
    double escape_error_bound{0};  //!< additive O-term (constant 1)
};

//! Hitting a small disk B(y, r) from a nearby x
inline CondHitResult cond_hit_small_disk(Point x, Point y, double r,
                                         double delta0 = 1,
                                         QuadratureSpec const& q = {})
{
    double d = std::abs(x - y);
    double ay = std::abs(y);
    if (std::abs(x) < 1 || ay < 1)
    {
        throw std::invalid_argument(
            "cond_hit_small_disk: x and y must lie outside the unit disk");
    }
    if (!(d < 0.5))
    {
        throw std::invalid_argument("cond_hit_small_disk: need |x - y| < 1/2");
    }
    if (!(d <= std::pow(ay - 1, 1 + delta0)))
    {
        throw std::invalid_argument(
            "cond_hit_small_disk: need |x - y| <= (|y| - 1)^(1 + delta0)");
    }
    if (!(r > 0 && r < d))
    {
        throw std::invalid_argument("cond_hit_small_disk: need 0 < r < |x - y|");
    }
    EllValue ly = ell(y, q);
    double lny = std::log(ay);
    double den = -std::log(r) + ly.value + lny;
    CondHitResult out;
    out.hit = (-std::log(d) + ly.value + lny) / den;
    out.escape = std::log(d / r) / den;
    double o = d * ly.tilde / ((ay - 1) * (-std::log(d) + lny));
    out.hit_error_bound = out.hit * o;
    out.escape_error_bound = o;
    return out;
}

//---------------------------------------------------------------------------//
// L(x, y)
//---------------------------------------------------------------------------//
namespace detail
{
//! ln(|z - y| |conj-reflected z - y| / |x0 - y|^2) for z = x0 e^{i phi}
inline double folded_log_ratio(Point x0, Point y, double phi)
{
    double s = std::sin(phi);
    double c1 = -2 * std::sin(0.5 * phi) * std::sin(0.5 * phi);
    double n0 = std::norm(x0 - y);
    Point yb = std::conj(y);
    Point up = x0 * Point{c1, s};
    Point dn = x0 * Point{c1, -s};
    // |z - y|^2 - |x0 - y|^2 = -2 Re((z - x0) conj y) for |z| = |x0| = 1
    double a = std::log1p(-2 * (up * yb).real() / n0);
    double b = std::log1p(-2 * (dn * yb).real() / n0);
    return 0.5 * (a + b);
}
}  // namespace detail

inline constexpr double L_min_separation = 1e-6;

/*!
 * L(x, y) by quadrature of the circle integral; |x| = 1 uses the boundary
 * formula.
 */
inline double L_value(Point x, Point y, QuadratureSpec const& q = {})
{
    double ax = std::abs(x);
    if (ax < 1 - 1e-12 || std::abs(y) < 1 - 1e-12)
    {
        throw std::invalid_argument(
            "L_value: x and y must lie outside the open unit disk");
    }
    if (!(std::abs(x - y) >= L_min_separation))
    {
        throw std::invalid_argument(
            "L_value: x and y closer than the refusal distance 1e-6");
    }
    Point x0 = x / ax;
    double n0 = std::norm(x0 - y);
    if (ax - 1 <= 1e-12)
    {
        auto f = [&](double phi) {
            double s = std::sin(0.5 * phi);
            return detail::folded_log_ratio(x0, y, phi) / (4 * s * s);
        };
        double integral = integrate(f, 0, std::numbers::pi, log_breaks(1e-3), q);
        return ((y - x0) * std::conj(y)).real() / n0 + integral / std::numbers::pi;
    }
    double delta = ax - 1;
    auto f = [&](double phi) {
        double s = std::sin(phi);
        double c1 = -2 * std::sin(0.5 * phi) * std::sin(0.5 * phi);
        double den = (c1 - delta) * (c1 - delta) + s * s;
        return detail::folded_log_ratio(x0, y, phi) / den;
    };
    double integral = integrate(f, 0, std::numbers::pi, log_breaks(delta), q);
    // ln(|x - y| / |x0 - y|) with |x - y|^2 - |x0 - y|^2 expanded in delta
    double shift = delta * (2 + delta) - 2 * delta * (x0 * std::conj(y)).real();
    double log_ratio = 0.5 * std::log1p(shift / n0);
    double lx = std::log1p(delta);
    return 1 + (-log_ratio + delta * (2 + delta) / (2 * std::numbers::pi) * integral)
                   / lx;
}

//---------------------------------------------------------------------------//
// RESCALED DISTANCES
//---------------------------------------------------------------------------//
struct PsiTriple
{
    double psi1{0};
    double psi2{0};
    double psi3{0};
    double h{0};
    double x_norm{0};
    double alpha{0};

    double sum() const { return psi1 + psi2 + psi3; }
};

inline PsiTriple psi_terms(double h, double x_norm, double alpha, double ell_val)
{
    if (!(h > 0) || !(alpha > 0) || !(x_norm > 1))
    {
        throw std::invalid_argument(
            "psi_terms: need h > 0, alpha > 0, |x| > 1");
    }
    double lx = std::log(x_norm);
    double l2 = lx * lx;
    double lt = std::max(std::abs(ell_val), 1.0);
    double decay = std::exp(-2 * alpha * l2 / h);
    PsiTriple p;
    p.h = h;
    p.x_norm = x_norm;
    p.alpha = alpha;
    p.psi1 = lt * h / (alpha * l2);
    p.psi2 = (1 + alpha * l2 / h + lx) * decay / (x_norm * lx);
    p.psi3 = (1 + p.psi1) * decay / (x_norm - 1);
    return p;
}

//! exp(-2 alpha ln^2|x| / b)
inline double r_b(double alpha, double x_norm, double b)
{
    if (!(b > 0))
    {
        throw std::invalid_argument("r_b: need b > 0");
    }
    double lx = std::log(x_norm);
    return std::exp(-2 * alpha * lx * lx / b);
}

//! Successive differences of 2 alpha ln^2|x| / ln(1 / Phi^(j))
inline std::vector<double> ytilde_transform(std::vector<double> const& distances,
                                            double alpha, double x_norm)
{
    double lx = std::log(x_norm);
    double c = 2 * alpha * lx * lx;
    std::vector<double> out;
    double prev = 0;
    for (double d : distances)
    {
        if (!(d < 1) || !(d > 0))
        {
            throw std::invalid_argument(
                "ytilde_transform: distances must lie in (0, 1)");
        }
        double v = c / -std::log(d);
        out.push_back(v - prev);
        prev = v;
    }
    return out;
}

template<class Profile>
auto ytilde_transform(Profile const& p, double alpha, double x_norm)
    -> decltype(p.distances, std::vector<double>{})
{
    return ytilde_transform(p.distances, alpha, x_norm);
}

//! exp(-pi alpha caphat)
inline double vacancy_prob(double alpha, double caphat_value)
{
    if (caphat_value < 0)
    {
        throw std::invalid_argument("vacancy_prob: negative capacity");
    }
    if (alpha < 0)
    {
        throw std::invalid_argument("vacancy_prob: negative level");
    }
    return std::exp(-std::numbers::pi * alpha * caphat_value);
}

//---------------------------------------------------------------------------//
// ANNULUS
//---------------------------------------------------------------------------//
/*!
 * Dirichlet Green function of the annulus a < |z| < b, normalized so that
 * G(z, w) + ln|z - w| is harmonic near w.
 */
inline double annulus_green(Point z, Point w, double a, double b,
                            int terms = 200)
{
    double rz = std::abs(z), rw = std::abs(w);
    if (!(0 < a && a < b) || rz < a || rz > b || rw <= a || rw >= b)
    {
        throw std::invalid_argument("annulus_green: points outside the annulus");
    }
    if (z == w)
    {
        throw std::invalid_argument("annulus_green: z equals w");
    }
    double lo = std::min(rz, rw), hi = std::max(rz, rw);
    double phi = std::arg(z) - std::arg(w);
    double q = lo / hi;
    // Free-space part: sum of q^n cos(n phi) / n in closed form
    double g = std::log(b / hi) * std::log(lo / a) / std::log(b / a)
               - std::log(std::abs(1.0 - std::polar(q, phi)));
    for (int n = 1; n <= terms; ++n)
    {
        double e_lo = std::pow(a / lo, 2 * n);
        double e_hi = std::pow(hi / b, 2 * n);
        double e_ab = std::pow(a / b, 2 * n);
        double corr = ((1 - e_lo) * (1 - e_hi) - (1 - e_ab)) / (1 - e_ab);
        double t = std::pow(q, n) * corr;
        g += std::cos(n * phi) * t / n;
        if (std::abs(t) < 1e-18)
        {
            break;
        }
    }
    return g;
}

/*!
 * Mass of the arc t0 < theta < t1 of the circle |z| = r under the exit law
 * of planar Brownian motion from (s, 0) in the annulus r < |z| < R,
 * conditioned on exiting through the inner circle.
 */
inline double annulus_inner_arc_mass(double s, double r, double R, double t0,
                                     double t1, int terms = 200)
{
    if (!(0 < r && r < s && s < R) || !(t0 <= t1))
    {
        throw std::invalid_argument("annulus_inner_arc_mass: need 0 < r < s < R");
    }
    double p_inner = std::log(R / s) / std::log(R / r);
    double total = p_inner * (t1 - t0);
    for (int n = 1; n <= terms; ++n)
    {
        // ((R/s)^n - (s/R)^n) / ((R/r)^n - (r/R)^n)
        double w = std::pow(r / s, n) * (1 - std::pow(s / R, 2 * n))
                   / (1 - std::pow(r / R, 2 * n));
        total += 2 * w * (std::sin(n * t1) - std::sin(n * t0)) / n;
        if (w < 1e-18)
        {
            break;
        }
    }
    return total / (2 * std::numbers::pi * p_inner);
}

//! Remainder ln|x| - ln|y| and the scale 2|x - y| / |y| that bounds it
struct DiffLogs
{
    double remainder{0};
    double bound{0};
};

inline DiffLogs diff_logs(Point x, Point y)
{
    double ay = std::abs(y);
    if (!(ay > 0))
    {
        throw std::invalid_argument("diff_logs: y must be nonzero");
    }
    return {std::log1p((std::abs(x) - ay) / ay), 2 * std::abs(x - y) / ay};
}

}  // namespace bri2d
