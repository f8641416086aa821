#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "path.hpp"
#include "rng.hpp"
#include "stochastic.hpp"

namespace bri2d
{
//---------------------------------------------------------------------------//
/*!
 * Stopping rule: first exit from the annulus inner < |z - c| < outer.
 */
struct StopSpec
{
    std::optional<double> inner_radius;
    std::optional<double> outer_radius;
    std::size_t max_steps{std::size_t{1} << 26};
};

//! Reason a sampled path ended
enum class StopReason : std::uint8_t
{
    inner,
    outer,
    max_steps,
    immediate
};

//! Skew-product coordinates of the conditioned motion
struct SkewProductState
{
    Bes3State bes3;
    double angle{0};
    double clock{0};
};

//! Step-size policy of the skew-product sampler
struct SkewOptions
{
    double dr{1.0 / 128};  //!< lifted step below coarse_from
    double coarse_from{std::numeric_limits<double>::infinity()};
    double growth{1.0 / 12};  //!< step per unit log radius beyond coarse_from
    double max_step{1.0};
    double gap_fraction{0};  //!< step grows with the distance to stop levels
};

//! Default distance from the unit circle below which Euler is refused
inline constexpr double euler_exclusion = 0.05;

namespace detail
{
//---------------------------------------------------------------------------//
/*!
 * Earliest first exit of a refined segment from lo < level < hi.
 *
 * Level is |state[0..dims)|, which is 1-Lipschitz in the chart, so a piece
 * with chord midpoint m and k-sigma radius R has levels in
 * [|m| - R, |m| + R].
 */
struct CrossingSearch
{
    struct Node
    {
        LiftedState state;
        double time;
        int depth;
    };

    int dims;
    double lo;
    double hi;

    double level(LiftedState const& s) const
    {
        double acc = 0;
        for (int i = 0; i < dims; ++i)
        {
            acc += s[i] * s[i];
        }
        return std::sqrt(acc);
    }

    bool inside(double l) const { return l > lo && l < hi; }

    //! Chain of nodes after the segment start ending at the exit point
    std::optional<std::vector<Node>>
    find(PlanarPath const& path, std::size_t seg) const
    {
        std::vector<Node> chain;
        SegmentView stack[max_refinement_depth + 2];
        int top = 0;
        stack[top++] = root_view(path, seg);
        while (top > 0)
        {
            SegmentView v = stack[--top];
            double la = this->level(v.sa);
            double lb = this->level(v.sb);
            if (!this->inside(lb))
            {
                if (v.can_split())
                {
                    auto [l, r] = split_view(path, v);
                    stack[top++] = r;
                    stack[top++] = l;
                    continue;
                }
                chain.push_back(this->exit_point(v, la, lb));
                return chain;
            }
            double sigma = std::sqrt(v.tb - v.ta);
            LiftedState m;
            double d2 = 0;
            for (int i = 0; i < dims; ++i)
            {
                m[i] = 0.5 * (v.sa[i] + v.sb[i]);
                double d = v.sb[i] - v.sa[i];
                d2 += d * d;
            }
            double chord = std::sqrt(d2);
            double radius = 0.5 * chord + bound_sigmas * sigma;
            double lm = this->level(m);
            double shortfall = std::min(std::min(la, lb) - lo,
                                        hi - std::max(la, lb));
            bool safe = (lm - radius > lo && lm + radius < hi)
                        || chord + sigma < shortfall / 16;
            if (safe || !v.can_split())
            {
                chain.push_back({v.sb, v.tb, v.depth});
                continue;
            }
            auto [l, r] = split_view(path, v);
            stack[top++] = r;
            stack[top++] = l;
        }
        return std::nullopt;
    }

    //! Point on the chord where the level reaches the violated boundary
    Node exit_point(SegmentView const& v, double la, double lb) const
    {
        double target = lb >= hi ? hi : lo;
        // Solve |a + t (b - a)| = target on [0, 1]
        double aa = 0, ab = 0, bb = 0;
        for (int i = 0; i < dims; ++i)
        {
            double d = v.sb[i] - v.sa[i];
            aa += d * d;
            ab += v.sa[i] * d;
            bb += v.sa[i] * v.sa[i];
        }
        double t = 1;
        if (aa > 0)
        {
            double disc = ab * ab - aa * (bb - target * target);
            disc = std::max(disc, 0.0);
            double sq = std::sqrt(disc);
            double t1 = (-ab - sq) / aa;
            double t2 = (-ab + sq) / aa;
            t = (t1 >= 0 && t1 <= 1) ? t1 : std::clamp(t2, 0.0, 1.0);
            if (la == target)
            {
                t = 0;
            }
        }
        Node n;
        for (int i = 0; i < 4; ++i)
        {
            n.state[i] = v.sa[i] + t * (v.sb[i] - v.sa[i]);
        }
        // Keep times strictly increasing
        n.time = v.ta + std::max(t, 1e-6) * (v.tb - v.ta);
        n.depth = v.depth;
        return n;
    }
};

//! Replace the provisional last node by the refined chain up to the exit
inline void splice_exit(PlanarPath& path,
                        std::vector<CrossingSearch::Node> const& chain)
{
    std::size_t seg = path.segment_count() - 1;
    path.states.pop_back();
    path.times.pop_back();
    path.vertices.pop_back();
    path.refinement_depth.pop_back();
    if (path.segment_keys.size() < seg)
    {
        std::size_t old = path.segment_keys.size();
        path.segment_keys.resize(seg);
        for (std::size_t i = old; i < seg; ++i)
        {
            path.segment_keys[i] = derive_stream(path.stream, i);
        }
    }
    for (auto const& n : chain)
    {
        std::size_t idx = path.segment_count();
        path.segment_keys.push_back(
            derive_stream(path.stream, idx | (std::uint64_t{1} << 62)));
        path.states.push_back(n.state);
        path.times.push_back(n.time);
        path.vertices.push_back(path.map(n.state));
        path.refinement_depth.push_back(static_cast<std::uint8_t>(n.depth));
    }
}

inline void append_node(PlanarPath& path, LiftedState const& s, double t)
{
    path.states.push_back(s);
    path.times.push_back(t);
    path.vertices.push_back(path.map(s));
    if (path.states.size() > 1)
    {
        path.refinement_depth.push_back(0);
    }
}

inline void validate_stop(StopSpec const& stop, double min_inner, char const* who)
{
    if (!stop.inner_radius && !stop.outer_radius)
    {
        throw std::invalid_argument(std::string(who)
                                    + ": stop rule has no clause");
    }
    if (stop.inner_radius && *stop.inner_radius < min_inner)
    {
        throw std::invalid_argument(std::string(who)
                                    + ": inner stop radius below the "
                                      "avoided disk");
    }
    if (stop.inner_radius && stop.outer_radius
        && !(*stop.outer_radius > *stop.inner_radius))
    {
        throw std::invalid_argument(std::string(who)
                                    + ": outer stop radius must exceed "
                                      "inner stop radius");
    }
}

/*!
 * Skew-product stepping in the lifted chart.
 *
 * The state is a 4-d Brownian motion (w, b); log radius = |w| + offset and
 * winding angle = b. Levels are given for |w|.
 */
//! Continue a skew-chart path from its last node until it leaves (lo, hi)
inline StopReason continue_skew(PlanarPath& path, double lo, double hi,
                                SkewOptions const& opts, std::size_t max_steps,
                                RngStream& stream)
{
    CrossingSearch search{3, lo, hi};
    LiftedState s = path.states.back();
    double t = path.times.back();
    if (!search.inside(search.level(s)))
    {
        return StopReason::immediate;
    }
    for (std::size_t step = 0; step < max_steps; ++step)
    {
        double l = search.level(s);
        double sigma = opts.dr;
        if (l > opts.coarse_from)
        {
            sigma = std::clamp(opts.growth * (l - opts.coarse_from), opts.dr,
                               opts.max_step);
        }
        if (opts.gap_fraction > 0)
        {
            double gap = std::min(l - lo, hi - l);
            sigma = std::max(sigma, std::min(opts.max_step,
                                             opts.gap_fraction * gap));
        }
        for (int i = 0; i < 4; ++i)
        {
            s[i] += sigma * stream.normal();
        }
        t += sigma * sigma;
        append_node(path, s, t);
        if (auto chain = search.find(path, path.segment_count() - 1))
        {
            splice_exit(path, *chain);
            double le = search.level(path.states.back());
            return le >= hi - 1e-12 * (1 + hi) ? StopReason::outer
                                                : StopReason::inner;
        }
    }
    path.truncated = true;
    return StopReason::max_steps;
}

inline StopReason run_skew(PlanarPath& path, LiftedState s, double lo,
                           double hi, SkewOptions const& opts,
                           std::size_t max_steps, RngStream& stream)
{
    append_node(path, s, 0.0);
    return continue_skew(path, lo, hi, opts, max_steps, stream);
}

inline std::uint64_t fresh_path_key(RngStream& stream)
{
    return derive_stream(stream.stream_id(), stream.next_u64());
}

}  // namespace detail

//---------------------------------------------------------------------------//
/*!
 * Conditioned Brownian motion via its skew-product representation.
 *
 * The trace is exp(log|start| + Z + i(arg start + B)) with Z a Bes(3)
 * realized as the norm of a 3-d Brownian motion started at log|start| and B
 * an independent Brownian motion, both on the lifted clock.
 */
inline PlanarPath sample_conditioned_path_skew(Point start, StopSpec const& stop,
                                               double dr, RngStream& stream,
                                               SkewOptions opts = {},
                                               StopReason* reason = nullptr)
{
    double s0 = std::abs(start);
    if (s0 < 1 - 1e-12)
    {
        throw std::invalid_argument(
            "sample_conditioned_path_skew: start strictly inside the unit "
            "disk");
    }
    if (!(dr > 0))
    {
        throw std::invalid_argument(
            "sample_conditioned_path_skew: step must be positive");
    }
    detail::validate_stop(stop, 1.0, "sample_conditioned_path_skew");
    opts.dr = dr;

    PlanarPath path;
    path.origin = PathOrigin::conditioned;
    path.chart = Chart::skew;
    path.frame.angle_offset = std::arg(start);
    path.seed = stream.seed();
    path.stream = detail::fresh_path_key(stream);
    path.grid_tolerance = 1e-12;

    double u0 = std::log(std::max(s0, 1.0));
    double lo = stop.inner_radius ? std::log(*stop.inner_radius)
                                  : -std::numeric_limits<double>::infinity();
    double hi = stop.outer_radius ? std::log(*stop.outer_radius)
                                  : std::numeric_limits<double>::infinity();
    if (!(u0 > lo && u0 < hi))
    {
        detail::append_node(path, LiftedState{u0, 0, 0, 0}, 0.0);
        path.vertices[0] = start;
        if (reason)
        {
            *reason = StopReason::immediate;
        }
        return path;
    }
    auto why = detail::run_skew(path, LiftedState{u0, 0, 0, 0}, lo, hi, opts,
                                stop.max_steps, stream);
    path.vertices[0] = start;
    if (reason)
    {
        *reason = why;
    }
    return path;
}

//---------------------------------------------------------------------------//
/*!
 * Returns of a skew-chart branch stopped at lifted level hi to level lw.
 *
 * From hi the Bes(3) level reaches lw < hi with probability lw / hi. Given a
 * return, the level is a Brownian motion until it hits lw, so the angle
 * moves by a Cauchy variable of scale hi - lw. The excursion stays above lw
 * and is drawn as a zero-duration arc at level hi followed by a ray down to
 * lw; no point of that connector is closer to a point below level lw than
 * the return point. After each return the branch runs until hi again.
 * Returns the number of returns.
 */
inline std::size_t append_returns(PlanarPath& path, double lw, double hi,
                                  SkewOptions const& opts, std::size_t max_steps,
                                  RngStream& stream)
{
    constexpr double piece = 0.1;  // connector resolution in the chart
    std::size_t returns = 0;
    while (lw > 0 && lw < hi && !path.truncated)
    {
        LiftedState s = path.states.back();
        double t = path.times.back();
        double level = PlanarPath::lifted_radius(s);
        if (!(stream.uniform() < lw / level))
        {
            break;
        }
        double jump = (level - lw) * std::tan(std::numbers::pi * (stream.uniform() - 0.5));
        // The lifted angle only matters modulo 2 pi
        double turn = std::remainder(jump, 2 * std::numbers::pi);
        int n_arc = static_cast<int>(std::ceil(std::abs(turn) / piece));
        double b0 = s[3];
        for (int k = 1; k <= n_arc; ++k)
        {
            s[3] = b0 + turn * k / n_arc;
            detail::append_node(path, s, t);
        }
        int n_ray = static_cast<int>(std::ceil((level - lw) / piece));
        LiftedState top = s;
        for (int k = 1; k <= n_ray; ++k)
        {
            double target = level + (lw - level) * k / n_ray;
            for (int i = 0; i < 3; ++i)
            {
                s[i] = top[i] * (target / level);
            }
            detail::append_node(path, s, t);
        }
        ++returns;
        detail::continue_skew(path, -std::numeric_limits<double>::infinity(), hi,
                              opts, max_steps, stream);
    }
    return returns;
}

//---------------------------------------------------------------------------//
/*!
 * Euler-Maruyama scheme for dX = X / (|X|^2 ln|X|) dt + dW.
 *
 * With relative_step the time step is dt * |X|^2 so that the spatial step
 * scales with the radius.
 */
struct EulerOptions
{
    bool relative_step{false};
    double exclusion{euler_exclusion};
};

inline Point conditioned_drift(Point x)
{
    double r2 = std::norm(x);
    return x / (r2 * 0.5 * std::log(r2));
}

inline PlanarPath sample_conditioned_path_euler(Point start, StopSpec const& stop,
                                                double dt, RngStream& stream,
                                                EulerOptions opts = {},
                                                StopReason* reason = nullptr)
{
    if (!(std::abs(start) > 1 + opts.exclusion))
    {
        throw std::invalid_argument(
            "sample_conditioned_path_euler: start too close to the unit "
            "circle for the Euler backend");
    }
    if (!(dt > 0))
    {
        throw std::invalid_argument(
            "sample_conditioned_path_euler: time step must be positive");
    }
    detail::validate_stop(stop, 1.0, "sample_conditioned_path_euler");

    PlanarPath path;
    path.origin = PathOrigin::conditioned;
    path.chart = Chart::planar;
    path.seed = stream.seed();
    path.stream = detail::fresh_path_key(stream);
    path.grid_tolerance = 1e-12;

    double lo = stop.inner_radius ? *stop.inner_radius : 1.0;
    double hi = stop.outer_radius ? *stop.outer_radius
                                  : std::numeric_limits<double>::infinity();
    detail::CrossingSearch search{2, lo, hi};
    LiftedState s{start.real(), start.imag(), 0, 0};
    detail::append_node(path, s, 0.0);
    StopReason why = StopReason::max_steps;
    if (!search.inside(std::abs(start)))
    {
        why = StopReason::immediate;
    }
    else
    {
        double t = 0;
        std::size_t step = 0;
        for (; step < stop.max_steps; ++step)
        {
            Point x{s[0], s[1]};
            double h = opts.relative_step ? dt * std::norm(x) : dt;
            Point drift = conditioned_drift(x);
            double sd = std::sqrt(h);
            double gx = stream.normal();
            double gy = stream.normal();
            s[0] += drift.real() * h + sd * gx;
            s[1] += drift.imag() * h + sd * gy;
            t += h;
            detail::append_node(path, s, t);
            if (auto chain = search.find(path, path.segment_count() - 1))
            {
                detail::splice_exit(path, *chain);
                double le = search.level(path.states.back());
                why = le >= hi - 1e-12 * (1 + hi) ? StopReason::outer
                                                   : StopReason::inner;
                break;
            }
        }
        if (step == stop.max_steps)
        {
            path.truncated = true;
        }
    }
    if (reason)
    {
        *reason = why;
    }
    return path;
}

//---------------------------------------------------------------------------//
/*!
 * Motion conditioned to avoid B(center, r): center + r * (conditioned motion
 * from (start - center) / r). Stop radii are measured from center.
 */
inline PlanarPath sample_scaled_conditioned(Point center, double r, Point start,
                                            StopSpec stop, RngStream& stream,
                                            double dr = 1.0 / 128,
                                            StopReason* reason = nullptr)
{
    if (!(r > 0))
    {
        throw std::invalid_argument(
            "sample_scaled_conditioned: radius must be positive");
    }
    if (std::abs(start - center) < r * (1 - 1e-12))
    {
        throw std::invalid_argument(
            "sample_scaled_conditioned: start strictly inside the avoided "
            "disk");
    }
    if (stop.inner_radius)
    {
        *stop.inner_radius /= r;
    }
    if (stop.outer_radius)
    {
        *stop.outer_radius /= r;
    }
    auto path = sample_conditioned_path_skew(
        (start - center) / r, stop, dr, stream, {}, reason);
    path = transformed(std::move(path), center, r);
    path.vertices[0] = start;
    path.origin = PathOrigin::scaled_conditioned;
    return path;
}

//---------------------------------------------------------------------------//
/*!
 * Earliest crossing of |z - center| = rho along the polyline.
 *
 * Returns the index of the segment start and the interpolated point.
 */
inline std::optional<std::pair<std::size_t, Point>>
first_hit_radius(PlanarPath const& path, Point center, double rho)
{
    if (path.vertices.empty())
    {
        return std::nullopt;
    }
    if (std::abs(path.vertices[0] - center) == rho)
    {
        return std::pair{std::size_t{0}, path.vertices[0]};
    }
    for (std::size_t i = 0; i + 1 < path.vertices.size(); ++i)
    {
        Point a = path.vertices[i] - center;
        Point d = path.vertices[i + 1] - path.vertices[i];
        double aa = std::norm(d);
        if (aa == 0)
        {
            continue;
        }
        double ab = (a * std::conj(d)).real();
        double c = std::norm(a) - rho * rho;
        double disc = ab * ab - aa * c;
        if (disc < 0)
        {
            continue;
        }
        double sq = std::sqrt(disc);
        for (double t : {(-ab - sq) / aa, (-ab + sq) / aa})
        {
            if (t >= 0 && t <= 1)
            {
                return std::pair{i, path.vertices[i] + t * d};
            }
        }
    }
    return std::nullopt;
}

//---------------------------------------------------------------------------//
/*!
 * Entrance angle of planar Brownian motion into B(r), started at (s, 0) and
 * conditioned to hit B(r) before leaving B(R).
 *
 * Exit positions are sampled by walk on spheres, which reproduces the exit
 * law of Brownian motion from the annulus exactly up to the absorption
 * shell of width eps * r.
 */
struct EntranceHistogram
{
    std::vector<std::size_t> counts;
    std::vector<double> masses;
    std::size_t accepted{0};
    std::size_t attempted{0};
};

inline std::optional<double>
sample_entrance_angle(double r, double R, double s, RngStream& stream,
                      double eps = 1e-9)
{
    Point z{s, 0};
    for (;;)
    {
        double m = std::abs(z);
        double to_inner = m - r;
        double to_outer = R - m;
        if (to_outer <= eps * R)
        {
            return std::nullopt;
        }
        if (to_inner <= eps * r)
        {
            return std::arg(z);
        }
        z += std::polar(std::min(to_inner, to_outer), stream.angle());
    }
}

inline EntranceHistogram
estimate_entrance_angle_law(double r, double R, double s, std::size_t replicas,
                            std::uint64_t seed, std::uint64_t stream_base,
                            std::size_t sectors = 12)
{
    if (!(r > 0 && 2 * r < s && s < R))
    {
        throw std::invalid_argument(
            "estimate_entrance_angle_law: requires 0 < 2r < s < R");
    }
    if (sectors == 0)
    {
        throw std::invalid_argument(
            "estimate_entrance_angle_law: need at least one sector");
    }
    EntranceHistogram h;
    h.counts.assign(sectors, 0);
    while (h.accepted < replicas)
    {
        RngStream rng(seed, derive_stream(stream_base, h.attempted));
        ++h.attempted;
        auto angle = sample_entrance_angle(r, R, s, rng);
        if (!angle)
        {
            continue;
        }
        double a = *angle < 0 ? *angle + 2 * std::numbers::pi : *angle;
        auto k = static_cast<std::size_t>(a / (2 * std::numbers::pi) * sectors);
        h.counts[std::min(k, sectors - 1)] += 1;
        ++h.accepted;
    }
    h.masses.resize(sectors);
    for (std::size_t k = 0; k < sectors; ++k)
    {
        h.masses[k] = static_cast<double>(h.counts[k]) / h.accepted;
    }
    return h;
}

}  // namespace bri2d
