#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "conditioned.hpp"
#include "path.hpp"
#include "rng.hpp"

namespace bri2d
{
//! Poisson scale with its nesting mark
struct ScalePoint
{
    double rho{1};
    double mark{0};
    std::size_t index{0};

    //! Membership in the field at level alpha
    bool in_level(double alpha) const { return mark <= 2 * alpha / rho; }
};

//! Two conditioned branches from a common point of a circle
struct Moustache
{
    double anchor_angle{0};
    PlanarPath branch_pos;
    PlanarPath branch_neg;
};

enum class Construction : std::uint8_t
{
    moustache,
    bessel
};

inline char const* to_string(Construction c)
{
    return c == Construction::bessel ? "bessel" : "moustache";
}

//! Numerical settings shared by field samplers
struct FieldOptions
{
    double coarse_dr{1.0 / 16};
    double overshoot_log{4};  //!< branches run to e^overshoot_log * window
    bool returns{true};  //!< sample returns into the window after the stop
    double growth{1.0 / 12};
    double max_step{1.0};
};

struct FieldEntry
{
    ScalePoint scale;
    Moustache moustache;  //!< already multiplied by rho
};

//---------------------------------------------------------------------------//
/*!
 * Windowed sample of the interlacement field at all levels up to alpha_max.
 */
struct InterlacementField
{
    double alpha_max{1};
    double b{1};
    double window_radius{1};
    std::uint64_t seed{0};
    std::uint64_t stream{0};
    Construction construction{Construction::moustache};
    FieldOptions options;
    std::vector<FieldEntry> entries;

    //! Entry indices of the field at level alpha, in increasing scale
    std::vector<std::size_t> restrict(double alpha) const
    {
        if (!(alpha > 0) || alpha > alpha_max * (1 + 1e-12))
        {
            throw std::invalid_argument(
                "restrict: level must lie in (0, alpha_max]");
        }
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < entries.size(); ++i)
        {
            if (entries[i].scale.in_level(alpha))
            {
                out.push_back(i);
            }
        }
        return out;
    }
};

//---------------------------------------------------------------------------//
/*!
 * Poisson points of intensity 2 alpha / rho on [b, rho_cap].
 *
 * Log-scales are ln b + (Y_1 + ... + Y_k) / (2 alpha) with Y_i Exponential.
 * Marks are uniform on (0, 2 alpha / rho].
 */
inline std::vector<ScalePoint>
sample_scales(double alpha, double b, double rho_cap, RngStream& stream)
{
    if (!(alpha > 0))
    {
        throw std::invalid_argument("sample_scales: level must be positive");
    }
    if (!(b > 0))
    {
        throw std::invalid_argument(
            "sample_scales: truncation level must be positive for a finite "
            "sample");
    }
    std::vector<ScalePoint> out;
    if (rho_cap < b)
    {
        return out;
    }
    double log_rho = std::log(b);
    double log_cap = std::log(rho_cap);
    for (;;)
    {
        log_rho += stream.exponential() / (2 * alpha);
        if (log_rho > log_cap)
        {
            break;
        }
        ScalePoint p;
        p.rho = std::exp(log_rho);
        p.mark = 2 * alpha / p.rho * stream.uniform();
        p.index = out.size();
        out.push_back(p);
    }
    return out;
}

namespace detail
{
inline SkewOptions branch_options(double extent, FieldOptions const& opts)
{
    SkewOptions so;
    so.dr = opts.coarse_dr;
    so.coarse_from = std::log(extent);
    so.growth = opts.growth;
    so.max_step = opts.max_step;
    return so;
}
}  // namespace detail

//! Moustache anchored on the unit circle, branches run to e^4 * extent
//! together with their returns below the extent
inline Moustache sample_moustache(double radial_extent, RngStream& stream,
                                  FieldOptions const& opts = {})
{
    if (!(radial_extent > 1))
    {
        throw std::invalid_argument(
            "sample_moustache: radial extent must exceed 1");
    }
    Moustache m;
    m.anchor_angle = stream.angle();
    Point anchor = std::polar(1.0, m.anchor_angle);
    StopSpec stop;
    stop.outer_radius = std::exp(opts.overshoot_log) * radial_extent;
    auto so = detail::branch_options(radial_extent, opts);
    RngStream pos = stream.child(1);
    RngStream neg = stream.child(2);
    m.branch_pos = sample_conditioned_path_skew(anchor, stop, so.dr, pos, so);
    m.branch_neg = sample_conditioned_path_skew(anchor, stop, so.dr, neg, so);
    if (opts.returns)
    {
        double lw = std::log(radial_extent);
        double hi = lw + opts.overshoot_log;
        append_returns(m.branch_pos, lw, hi, so, stop.max_steps, pos);
        append_returns(m.branch_neg, lw, hi, so, stop.max_steps, neg);
    }
    m.branch_pos.origin = PathOrigin::moustache_branch;
    m.branch_neg.origin = PathOrigin::moustache_branch;
    return m;
}

inline Moustache scaled(Moustache m, double rho)
{
    m.branch_pos = transformed(std::move(m.branch_pos), Point{0, 0}, rho);
    m.branch_neg = transformed(std::move(m.branch_neg), Point{0, 0}, rho);
    return m;
}

inline void validate_field_args(double alpha_max, double b, double window,
                                char const* who)
{
    if (!(alpha_max > 0))
    {
        throw std::invalid_argument(std::string(who)
                                    + ": alpha_max must be positive");
    }
    if (!(b > 0))
    {
        throw std::invalid_argument(std::string(who)
                                    + ": truncation level must be positive");
    }
    if (!(window >= std::max(b, 1.0)))
    {
        throw std::invalid_argument(std::string(who)
                                    + ": window radius below max(b, 1)");
    }
}

//! Field built from Poisson scales and scaled moustaches
inline InterlacementField assemble_field(double alpha_max, double b,
                                         double window_radius,
                                         RngStream const& stream,
                                         FieldOptions const& opts = {})
{
    validate_field_args(alpha_max, b, window_radius, "assemble_field");
    InterlacementField f;
    f.alpha_max = alpha_max;
    f.b = b;
    f.window_radius = window_radius;
    f.seed = stream.seed();
    f.stream = stream.stream_id();
    f.construction = Construction::moustache;
    f.options = opts;

    RngStream scale_rng = stream.child(0);
    auto scales = sample_scales(alpha_max, b, window_radius, scale_rng);
    f.entries.reserve(scales.size());
    for (auto const& sp : scales)
    {
        RngStream mrng = stream.child(sp.index + 1);
        double extent = std::max(window_radius / sp.rho, 1.0 + 1e-9);
        FieldEntry e;
        e.scale = sp;
        e.moustache = scaled(sample_moustache(extent, mrng, opts), sp.rho);
        f.entries.push_back(std::move(e));
    }
    return f;
}

//---------------------------------------------------------------------------//
/*!
 * Branch (log rho + Z_t, theta + B_t) mapped through exp, with Z a Bes(3)
 * from 0 and B an independent Brownian motion.
 */
inline PlanarPath sample_bessel_branch(double log_rho, double theta,
                                       double log_stop, double log_window,
                                       RngStream& stream,
                                       FieldOptions const& opts)
{
    PlanarPath path;
    path.origin = PathOrigin::bessel_branch;
    path.chart = Chart::skew;
    path.frame.log_offset = log_rho;
    path.frame.angle_offset = theta;
    path.seed = stream.seed();
    path.stream = derive_stream(stream.stream_id(), stream.next_u64());
    path.grid_tolerance = 1e-12;

    detail::CrossingSearch search{
        3, -std::numeric_limits<double>::infinity(), log_stop - log_rho};
    SkewProductState st;
    detail::append_node(path, LiftedState{0, 0, 0, 0}, 0.0);
    double coarse_from = log_window - log_rho;
    for (;;)
    {
        double z = st.bes3.norm();
        double dt = opts.coarse_dr;
        if (z > coarse_from)
        {
            dt = std::clamp(opts.growth * (z - coarse_from), opts.coarse_dr,
                            opts.max_step);
        }
        dt *= dt;
        st.bes3 = step_bes3(st.bes3, dt, stream);
        st.angle += std::sqrt(dt) * stream.normal();
        st.clock += dt;
        auto const& w = st.bes3.position3;
        detail::append_node(path, LiftedState{w[0], w[1], w[2], st.angle},
                            st.clock);
        if (auto chain = search.find(path, path.segment_count() - 1))
        {
            detail::splice_exit(path, *chain);
            break;
        }
    }
    if (opts.returns)
    {
        SkewOptions so;
        so.dr = opts.coarse_dr;
        so.coarse_from = coarse_from;
        so.growth = opts.growth;
        so.max_step = opts.max_step;
        append_returns(path, coarse_from, log_stop - log_rho, so,
                       StopSpec{}.max_steps, stream);
    }
    return path;
}

//! Field built from a rate-2 alpha Poisson process of log radii
inline InterlacementField assemble_field_bessel(double alpha_max, double b,
                                                double window_radius,
                                                RngStream const& stream,
                                                FieldOptions const& opts = {})
{
    validate_field_args(alpha_max, b, window_radius, "assemble_field_bessel");
    InterlacementField f;
    f.alpha_max = alpha_max;
    f.b = b;
    f.window_radius = window_radius;
    f.seed = stream.seed();
    f.stream = stream.stream_id();
    f.construction = Construction::bessel;
    f.options = opts;

    RngStream rng = stream.child(0);
    double lb = std::log(b);
    double lw = std::log(window_radius);
    struct Bits
    {
        RngStream* s;
        using result_type = std::uint64_t;
        static constexpr result_type min() { return 0; }
        static constexpr result_type max() { return ~result_type{0}; }
        result_type operator()() { return s->next_u64(); }
    } bits{&rng};
    std::poisson_distribution<long> count(2 * alpha_max * (lw - lb));
    long n = lw > lb ? count(bits) : 0;
    std::vector<double> logs(static_cast<std::size_t>(n));
    for (auto& l : logs)
    {
        l = lb + (lw - lb) * (1 - rng.uniform());
    }
    std::sort(logs.begin(), logs.end());
    for (std::size_t k = 0; k < logs.size(); ++k)
    {
        FieldEntry e;
        e.scale.rho = std::exp(logs[k]);
        e.scale.mark = 2 * alpha_max / e.scale.rho * rng.uniform();
        e.scale.index = k;
        RngStream br = stream.child(k + 1);
        double theta = br.angle();
        e.moustache.anchor_angle = theta;
        double stop = lw + opts.overshoot_log;
        RngStream pos = br.child(1);
        RngStream neg = br.child(2);
        e.moustache.branch_pos
            = sample_bessel_branch(logs[k], theta, stop, lw, pos, opts);
        e.moustache.branch_neg
            = sample_bessel_branch(logs[k], theta, stop, lw, neg, opts);
        f.entries.push_back(std::move(e));
    }
    return f;
}

//---------------------------------------------------------------------------//
// DISK QUERIES
//---------------------------------------------------------------------------//
inline constexpr double min_probe_radius = 1e-3;

/*!
 * Whether the refined trace meets the closed disk B(c, r).
 *
 * Pieces are bisected until their containment disk is below tol; a leaf
 * counts as a hit when its chord meets the disk.
 */
inline bool path_hits_disk(PlanarPath const& path, Point c, double r,
                           double tol)
{
    for (auto const& v : path.vertices)
    {
        if (std::abs(v - c) <= r)
        {
            return true;
        }
    }
    return traverse_path(
        path,
        [&](SegmentView const& v) {
            if (std::abs(v.pa - c) <= r || std::abs(v.pb - c) <= r)
            {
                return Visit::leaf;
            }
            Disk d = view_disk(path, v, bound_sigmas);
            if (std::abs(d.center - c) > d.radius + r)
            {
                return Visit::prune;
            }
            return d.radius <= tol ? Visit::leaf : Visit::split;
        },
        [&](SegmentView const& v) {
            return point_segment_distance(c, v.pa, v.pb) <= r;
        });
}

inline bool moustache_hits_disk(Moustache const& m, Point c, double r,
                                double tol)
{
    return path_hits_disk(m.branch_pos, c, r, tol)
           || path_hits_disk(m.branch_neg, c, r, tol);
}

inline void validate_probe(double r, char const* who)
{
    if (!(r >= min_probe_radius))
    {
        throw std::invalid_argument(std::string(who)
                                    + ": probe radius below the resolvable "
                                      "scale 1e-3");
    }
}

//! Number of level-alpha trajectories meeting B(x, r)
inline std::size_t count_hitting(InterlacementField const& field, double alpha,
                                 Point x, double r)
{
    validate_probe(r, "count_hitting");
    double tol = r / 256;
    std::size_t n = 0;
    for (auto i : field.restrict(alpha))
    {
        auto const& e = field.entries[i];
        if (e.scale.rho > std::abs(x) + r)
        {
            continue;
        }
        n += moustache_hits_disk(e.moustache, x, r, tol) ? 1 : 0;
    }
    return n;
}

//! Trajectories meeting B(x, b) but not B(x, a)
inline std::size_t
count_annulus_trajectories(InterlacementField const& field, double alpha,
                           Point x, double a, double b)
{
    if (!(a > 0 && a <= b))
    {
        throw std::invalid_argument(
            "count_annulus_trajectories: requires 0 < a <= b");
    }
    validate_probe(a, "count_annulus_trajectories");
    if (std::abs(x) + b > field.window_radius)
    {
        throw std::invalid_argument(
            "count_annulus_trajectories: annulus leaves the field window");
    }
    if (a == b)
    {
        return 0;
    }
    std::size_t n = 0;
    for (auto i : field.restrict(alpha))
    {
        auto const& e = field.entries[i];
        if (e.scale.rho > std::abs(x) + b)
        {
            continue;
        }
        if (moustache_hits_disk(e.moustache, x, b, b / 256)
            && !moustache_hits_disk(e.moustache, x, a, a / 256))
        {
            ++n;
        }
    }
    return n;
}

}  // namespace bri2d
