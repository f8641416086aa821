#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "stochastic.hpp"

namespace bri2d
{
//! Process that generated a path
enum class PathOrigin : std::uint8_t
{
    plain_bm,
    conditioned,
    scaled_conditioned,
    moustache_branch,
    bessel_branch,
    polyline
};

inline char const* to_string(PathOrigin o)
{
    switch (o)
    {
        case PathOrigin::plain_bm: return "plain_bm";
        case PathOrigin::conditioned: return "conditioned";
        case PathOrigin::scaled_conditioned: return "scaled_conditioned";
        case PathOrigin::moustache_branch: return "moustache_branch";
        case PathOrigin::bessel_branch: return "bessel_branch";
        case PathOrigin::polyline: return "polyline";
    }
    return "unknown";
}

//! Coordinates in which the driving Brownian motion is stored
enum class Chart : std::uint8_t
{
    planar,  //!< state[0..1] are planar coordinates
    skew  //!< |state[0..2]| is the log radius, state[3] the winding angle
};

//! Affine placement of the chart image in the plane
struct PathFrame
{
    Point center{0, 0};
    double scale{1};
    double log_offset{0};
    double angle_offset{0};
};

using LiftedState = std::array<double, 4>;

//! Disk with center and radius
struct Disk
{
    Point center;
    double radius;
};

//---------------------------------------------------------------------------//
/*!
 * Time-ordered polyline trace of a planar diffusion.
 *
 * When the lifted states are stored, each segment is a Brownian bridge in
 * the chart and can be bisected lazily. The midpoint randomness is keyed by
 * (seed, stream, segment, node code), so every refinement is a pure function
 * of the path and repeated queries see the same sub-path.
 */
struct PlanarPath
{
    std::vector<Point> vertices;
    std::vector<double> times;
    PathOrigin origin{PathOrigin::polyline};
    std::vector<std::uint8_t> refinement_depth;

    Chart chart{Chart::planar};
    PathFrame frame;
    std::vector<LiftedState> states;
    std::uint64_t seed{0};
    std::uint64_t stream{0};
    std::vector<std::uint64_t> segment_keys;
    double grid_tolerance{0};
    bool truncated{false};

    std::size_t size() const { return vertices.size(); }
    std::size_t segment_count() const
    {
        return vertices.empty() ? 0 : vertices.size() - 1;
    }
    bool refinable() const { return !states.empty(); }

    //! Stream keying the bridge midpoints of a segment
    std::uint64_t segment_key(std::size_t seg) const
    {
        return seg < segment_keys.size() ? segment_keys[seg]
                                         : derive_stream(stream, seg);
    }

    Point map(LiftedState const& s) const
    {
        if (chart == Chart::planar)
        {
            return frame.center + frame.scale * Point{s[0], s[1]};
        }
        double u = frame.log_offset + lifted_radius(s);
        return frame.center
               + frame.scale * std::polar(std::exp(u), frame.angle_offset + s[3]);
    }

    static double lifted_radius(LiftedState const& s)
    {
        return std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
    }
};

//! Explicit polyline with unit time steps; never refined
inline PlanarPath make_polyline(std::vector<Point> pts)
{
    PlanarPath p;
    p.origin = PathOrigin::polyline;
    p.vertices = std::move(pts);
    p.times.resize(p.vertices.size());
    for (std::size_t i = 0; i < p.times.size(); ++i)
    {
        p.times[i] = static_cast<double>(i);
    }
    p.refinement_depth.assign(p.segment_count(), 0);
    return p;
}

//! Apply z -> shift + factor * z to a path
inline PlanarPath transformed(PlanarPath p, Point shift, double factor)
{
    for (auto& v : p.vertices)
    {
        v = shift + factor * v;
    }
    p.frame.center = shift + factor * p.frame.center;
    p.frame.scale *= factor;
    p.grid_tolerance *= factor;
    return p;
}

//---------------------------------------------------------------------------//
// LAZY REFINEMENT
//---------------------------------------------------------------------------//
inline constexpr int max_refinement_depth = 24;

//! Bound on the bridge deviation from its chord, in units of sqrt(duration)
inline constexpr double bound_sigmas = 3.5;

/*!
 * A dyadic piece of one path segment.
 *
 * code is 1 for the whole segment and 2c, 2c+1 for the halves of piece c.
 */
struct SegmentView
{
    std::size_t segment{0};
    std::uint64_t code{1};
    int depth{0};
    LiftedState sa{};
    LiftedState sb{};
    double ta{0};
    double tb{0};
    Point pa;
    Point pb;
    bool exact{true};  //!< the chord is the trace (explicit polyline)

    bool can_split() const { return !exact && depth < max_refinement_depth; }
};

inline SegmentView root_view(PlanarPath const& path, std::size_t seg)
{
    SegmentView v;
    v.segment = seg;
    v.pa = path.vertices[seg];
    v.pb = path.vertices[seg + 1];
    v.ta = path.times[seg];
    v.tb = path.times[seg + 1];
    if (path.refinable())
    {
        v.sa = path.states[seg];
        v.sb = path.states[seg + 1];
        v.exact = false;
    }
    return v;
}

//! Disk containing the piece's trace up to a bridge deviation of k sigmas
inline Disk view_disk(PlanarPath const& path, SegmentView const& v, double k)
{
    if (v.exact)
    {
        return {0.5 * (v.pa + v.pb), 0.5 * std::abs(v.pb - v.pa)};
    }
    double sigma = std::sqrt(v.tb - v.ta);
    if (path.chart == Chart::planar)
    {
        double dx = v.sb[0] - v.sa[0];
        double dy = v.sb[1] - v.sa[1];
        double r = 0.5 * std::sqrt(dx * dx + dy * dy) + k * sigma;
        Point c = path.frame.center
                  + path.frame.scale
                        * Point{0.5 * (v.sa[0] + v.sb[0]),
                                0.5 * (v.sa[1] + v.sb[1])};
        return {c, path.frame.scale * r};
    }
    LiftedState m;
    double d2 = 0;
    for (int i = 0; i < 4; ++i)
    {
        m[i] = 0.5 * (v.sa[i] + v.sb[i]);
        double d = v.sb[i] - v.sa[i];
        d2 += d * d;
    }
    double rl = 0.5 * std::sqrt(d2) + k * sigma;
    double u = path.frame.log_offset + PlanarPath::lifted_radius(m);
    double rho = std::exp(u);
    Point c = path.frame.center
              + path.frame.scale * std::polar(rho, path.frame.angle_offset + m[3]);
    return {c, path.frame.scale * rho * std::expm1(rl)};
}

//! Conditional midpoint split of a piece
inline std::pair<SegmentView, SegmentView>
split_view(PlanarPath const& path, SegmentView const& v)
{
    double sd = std::sqrt(0.25 * (v.tb - v.ta));
    auto g = keyed_normals4(path.seed, path.segment_key(v.segment), v.code);
    LiftedState mid;
    int dims = path.chart == Chart::planar ? 2 : 4;
    for (int i = 0; i < 4; ++i)
    {
        mid[i] = 0.5 * (v.sa[i] + v.sb[i]) + (i < dims ? sd * g[i] : 0.0);
    }
    double tm = 0.5 * (v.ta + v.tb);
    Point pm = path.map(mid);

    SegmentView left = v;
    left.code = 2 * v.code;
    left.depth = v.depth + 1;
    left.sb = mid;
    left.tb = tm;
    left.pb = pm;

    SegmentView right = v;
    right.code = 2 * v.code + 1;
    right.depth = v.depth + 1;
    right.sa = mid;
    right.ta = tm;
    right.pa = pm;
    return {left, right};
}

//! Decision returned by refinement visitors
enum class Visit
{
    prune,  //!< discard this piece
    leaf,  //!< accept the chord of this piece
    split  //!< bisect and visit the halves in time order
};

/*!
 * Depth-first, time-ordered traversal of one segment.
 *
 * decide(view) chooses what to do; leaf(view) is called for accepted chords.
 * Pieces that cannot be split are handed to leaf when split is requested.
 * Returning true from leaf stops the traversal.
 */
template<class Decide, class Leaf>
bool traverse_segment(PlanarPath const& path, std::size_t seg,
                      Decide&& decide, Leaf&& leaf)
{
    SegmentView stack[max_refinement_depth + 2];
    int top = 0;
    stack[top++] = root_view(path, seg);
    while (top > 0)
    {
        SegmentView v = stack[--top];
        Visit action = decide(v);
        if (action == Visit::prune)
        {
            continue;
        }
        if (action == Visit::leaf || !v.can_split())
        {
            if (leaf(v))
            {
                return true;
            }
            continue;
        }
        auto [l, r] = split_view(path, v);
        stack[top++] = r;
        stack[top++] = l;
    }
    return false;
}

//! Traverse every segment of a path in time order
template<class Decide, class Leaf>
bool traverse_path(PlanarPath const& path, Decide&& decide, Leaf&& leaf)
{
    for (std::size_t s = 0; s < path.segment_count(); ++s)
    {
        if (traverse_segment(path, s, decide, leaf))
        {
            return true;
        }
    }
    return false;
}

//---------------------------------------------------------------------------//
// PLANAR PRIMITIVES
//---------------------------------------------------------------------------//
inline double point_segment_distance(Point p, Point a, Point b)
{
    Point ab = b - a;
    double len2 = std::norm(ab);
    if (len2 == 0)
    {
        return std::abs(p - a);
    }
    double t = ((p - a) * std::conj(ab)).real() / len2;
    t = std::clamp(t, 0.0, 1.0);
    return std::abs(p - (a + t * ab));
}

//! True when the closed disks intersect
inline bool disk_meets_disk(Disk const& a, Point c, double r)
{
    return std::abs(a.center - c) <= a.radius + r;
}

}  // namespace bri2d
