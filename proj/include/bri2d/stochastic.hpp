#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>

#include "rng.hpp"

namespace bri2d
{
using Point = std::complex<double>;

//---------------------------------------------------------------------------//
/*!
 * Three-dimensional Brownian coordinates whose norm is a Bes(3) process.
 */
struct Bes3State
{
    std::array<double, 3> position3{0, 0, 0};
    double time{0};

    double norm() const
    {
        return std::sqrt(position3[0] * position3[0]
                         + position3[1] * position3[1]
                         + position3[2] * position3[2]);
    }
};

//! Advance by independent N(0, dt) increments per coordinate
inline Bes3State step_bes3(Bes3State state, double dt, RngStream& stream)
{
    if (!(dt > 0))
    {
        throw std::invalid_argument("step_bes3: time step must be positive");
    }
    double sigma = std::sqrt(dt);
    for (double& c : state.position3)
    {
        c += sigma * stream.normal();
    }
    state.time += dt;
    return state;
}

//! Planar Brownian increment of duration dt
inline Point step_planar(Point p, double dt, RngStream& stream)
{
    if (!(dt > 0))
    {
        throw std::invalid_argument("step_planar: time step must be positive");
    }
    double sigma = std::sqrt(dt);
    double gx = stream.normal();
    double gy = stream.normal();
    return p + sigma * Point{gx, gy};
}

//---------------------------------------------------------------------------//
/*!
 * Planar Brownian bridge piece between two fixed endpoints.
 */
struct BridgeSegment
{
    Point start;
    Point end;
    double duration{1};
};

//! Split at the conditional midpoint: mean of the endpoints, variance t/4
inline std::pair<BridgeSegment, BridgeSegment>
refine_bridge(BridgeSegment const& seg, RngStream& stream)
{
    if (!(seg.duration > 0))
    {
        throw std::invalid_argument("refine_bridge: duration must be positive");
    }
    double half = 0.5 * seg.duration;
    double sigma = std::sqrt(0.25 * seg.duration);
    double gx = stream.normal();
    double gy = stream.normal();
    Point mid = 0.5 * (seg.start + seg.end) + sigma * Point{gx, gy};
    return {BridgeSegment{seg.start, mid, half},
            BridgeSegment{mid, seg.end, seg.duration - half}};
}

}  // namespace bri2d
