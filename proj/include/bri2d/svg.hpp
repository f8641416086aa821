#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "interlacement.hpp"

namespace bri2d
{
//! Rendering options
struct SvgStyle
{
    RasterWindow view{{0, 0}, 4};
    double pixels{800};
    double stroke{1.0};  //!< in pixels
    std::string trace_color{"#1f3a93"};
    std::string fill_color{"#f5b041"};
    std::string circle_color{"#c0392b"};
};

/*!
 * Geometry to draw: traces of a field at one level and an optional
 * component. At least one of field and component must be set.
 */
struct SvgScene
{
    InterlacementField const* field{nullptr};
    double alpha{0};  //!< level; 0 means the field's alpha_max
    RasterComponent const* component{nullptr};
};

namespace detail
{
inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

struct SvgMap
{
    double x0, y1, k;
    double px(Point p) const { return (p.real() - x0) * k; }
    double py(Point p) const { return (y1 - p.imag()) * k; }
};

//! Trace of a moustache as one polyline: reversed negative branch, then
//! the positive branch
inline std::vector<Point> moustache_polyline(Moustache const& m)
{
    std::vector<Point> pts(m.branch_neg.vertices.rbegin(),
                           m.branch_neg.vertices.rend());
    auto const& pos = m.branch_pos.vertices;
    pts.insert(pts.end(), pos.begin() + (pos.empty() ? 0 : 1), pos.end());
    return pts;
}

//! Drop runs of vertices far outside the view, keeping their end points
inline std::vector<Point> clip_polyline(std::vector<Point> const& pts,
                                        RasterWindow const& w)
{
    double lim = 2 * w.half_width;
    auto outside = [&](Point p) {
        return std::abs(p.real() - w.center.real()) > lim
               || std::abs(p.imag() - w.center.imag()) > lim;
    };
    std::vector<Point> out;
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        bool keep = !outside(pts[i]) || (i > 0 && !outside(pts[i - 1]))
                    || (i + 1 < pts.size() && !outside(pts[i + 1]));
        if (keep)
        {
            out.push_back(pts[i]);
        }
    }
    return out;
}
}  // namespace detail

/*!
 * Deterministic SVG of a scene: one polyline per trajectory, the
 * component as a filled path of cell runs, and the unit circle.
 */
inline std::string render_svg(SvgScene const& scene, SvgStyle const& style = {})
{
    if (!scene.field && !scene.component)
    {
        throw std::invalid_argument("render_svg: no geometry to draw");
    }
    if (!(style.view.half_width > 0) || !(style.pixels > 0))
    {
        throw std::invalid_argument("render_svg: bad view");
    }
    auto const& w = style.view;
    detail::SvgMap map{w.center.real() - w.half_width,
                       w.center.imag() + w.half_width,
                       style.pixels / (2 * w.half_width)};
    std::string px = detail::num(style.pixels);
    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px
         + "\" height=\"" + px + "\" viewBox=\"0 0 " + px + " " + px + "\">\n";
    s += "<defs><clipPath id=\"view\"><rect x=\"0\" y=\"0\" width=\"" + px
         + "\" height=\"" + px + "\"/></clipPath></defs>\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + px + "\" height=\"" + px
         + "\" fill=\"white\"/>\n";
    s += "<g clip-path=\"url(#view)\">\n";

    if (scene.component && !scene.component->empty)
    {
        auto const& c = *scene.component;
        s += "<path fill=\"" + style.fill_color + "\" stroke=\"none\" d=\"";
        // One rectangle per horizontal run of cells
        std::size_t i = 0;
        while (i < c.cells.size())
        {
            std::size_t j = i;
            while (j + 1 < c.cells.size() && c.cells[j + 1] == c.cells[j] + 1
                   && c.cells[j + 1] % c.n != 0)
            {
                ++j;
            }
            int row = static_cast<int>(c.cells[i] / c.n);
            int col0 = static_cast<int>(c.cells[i] % c.n);
            int col1 = static_cast<int>(c.cells[j] % c.n) + 1;
            Point lo{c.x0 + col0 * c.resolution, c.y0 + row * c.resolution};
            Point hi{c.x0 + col1 * c.resolution, c.y0 + (row + 1) * c.resolution};
            s += "M" + detail::num(map.px(lo)) + " " + detail::num(map.py(hi))
                 + "H" + detail::num(map.px(hi)) + "V" + detail::num(map.py(lo))
                 + "H" + detail::num(map.px(lo)) + "Z";
            i = j + 1;
        }
        s += "\"/>\n";
    }

    if (scene.field)
    {
        double alpha = scene.alpha > 0 ? scene.alpha : scene.field->alpha_max;
        s += "<g fill=\"none\" stroke=\"" + style.trace_color
             + "\" stroke-width=\"" + detail::num(style.stroke)
             + "\" stroke-linejoin=\"round\">\n";
        for (auto id : scene.field->restrict(alpha))
        {
            auto const& e = scene.field->entries[id];
            auto pts = detail::clip_polyline(
                detail::moustache_polyline(e.moustache), w);
            s += "<polyline data-index=\"" + std::to_string(e.scale.index)
                 + "\" points=\"";
            for (std::size_t k = 0; k < pts.size(); ++k)
            {
                s += (k ? " " : "") + detail::num(map.px(pts[k])) + ","
                     + detail::num(map.py(pts[k]));
            }
            s += "\"/>\n";
        }
        s += "</g>\n";
    }

    s += "<circle cx=\"" + detail::num(map.px(Point{0, 0})) + "\" cy=\""
         + detail::num(map.py(Point{0, 0})) + "\" r=\"" + detail::num(map.k)
         + "\" fill=\"none\" stroke=\"" + style.circle_color
         + "\" stroke-width=\"" + detail::num(1.5 * style.stroke) + "\"/>\n";
    s += "</g>\n</svg>\n";
    return s;
}

}  // namespace bri2d
