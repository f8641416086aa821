#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "interlacement.hpp"
#include "path.hpp"

namespace bri2d
{
//---------------------------------------------------------------------------//
// DISTANCES
//---------------------------------------------------------------------------//
//! Accuracy of distances to refinable traces
struct DistanceTolerance
{
    double relative{1e-6};
    double absolute{1e-12};
};

/*!
 * Distance from x to a path trace, by best-first branch and bound.
 *
 * Returns +inf when the trace is certified farther than cutoff. Explicit
 * polylines give exact segment distances; refinable traces are resolved to
 * the given tolerance.
 */
inline double path_distance(PlanarPath const& path, Point x, double cutoff,
                            DistanceTolerance tol = {})
{
    double best = std::numeric_limits<double>::infinity();
    for (auto const& v : path.vertices)
    {
        best = std::min(best, std::abs(v - x));
    }
    if (path.segment_count() == 0)
    {
        return best < cutoff ? best : std::numeric_limits<double>::infinity();
    }
    struct Item
    {
        double lower;
        SegmentView view;
        bool operator<(Item const& o) const { return lower > o.lower; }
    };
    std::priority_queue<Item> queue;
    auto push = [&](SegmentView const& v) {
        double lower;
        if (v.exact)
        {
            lower = point_segment_distance(x, v.pa, v.pb);
        }
        else
        {
            Disk d = view_disk(path, v, bound_sigmas);
            lower = std::max(0.0, std::abs(x - d.center) - d.radius);
        }
        if (lower < std::min(best, cutoff))
        {
            queue.push({lower, v});
        }
    };
    for (std::size_t s = 0; s < path.segment_count(); ++s)
    {
        push(root_view(path, s));
    }
    while (!queue.empty())
    {
        Item it = queue.top();
        queue.pop();
        double slack = std::max(tol.absolute, tol.relative * best);
        if (it.lower >= std::min(best, cutoff) - (it.view.exact ? 0.0 : slack))
        {
            break;
        }
        SegmentView const& v = it.view;
        if (v.exact)
        {
            best = std::min(best, it.lower);
            continue;
        }
        Disk d = view_disk(path, v, bound_sigmas);
        if (!v.can_split() || d.radius <= slack)
        {
            best = std::min(best, point_segment_distance(x, v.pa, v.pb));
            continue;
        }
        auto [l, r] = split_view(path, v);
        best = std::min(best, std::abs(l.pb - x));
        push(l);
        push(r);
    }
    return best < cutoff ? best : std::numeric_limits<double>::infinity();
}

inline double moustache_distance(Moustache const& m, Point x, double cutoff,
                                 DistanceTolerance tol = {})
{
    double a = path_distance(m.branch_pos, x, cutoff, tol);
    double b = path_distance(m.branch_neg, x, std::min(a, cutoff), tol);
    return std::min(a, b);
}

//! Smallest |z| over a trace, to relative tolerance
inline double path_min_modulus(PlanarPath const& path, double rel_tol = 1e-9)
{
    return path_distance(path, Point{0, 0},
                         std::numeric_limits<double>::infinity(),
                         {rel_tol, 0.0});
}

//! Axis-aligned square box
struct RasterWindow
{
    Point center{0, 0};
    double half_width{1};
};

//---------------------------------------------------------------------------//
/*!
 * Bounding-box hierarchy over the root segments of several traces, for
 * nearest-trace queries at many points.
 *
 * Segments whose bridge disk misses the box are dropped, so answers are
 * exact only for points whose nearest trace lies inside the box.
 */
class TraceIndex
{
  public:
    struct Source
    {
        PlanarPath const* path;
        std::size_t id;
    };

    TraceIndex(std::vector<Source> sources, RasterWindow box)
        : sources_{std::move(sources)}
    {
        double bx0 = box.center.real() - box.half_width;
        double bx1 = box.center.real() + box.half_width;
        double by0 = box.center.imag() - box.half_width;
        double by1 = box.center.imag() + box.half_width;
        for (std::size_t s = 0; s < sources_.size(); ++s)
        {
            PlanarPath const& path = *sources_[s].path;
            for (std::size_t g = 0; g < path.segment_count(); ++g)
            {
                Disk d = view_disk(path, root_view(path, g), bound_sigmas);
                Leaf e{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(g),
                       {d.center.real() - d.radius, d.center.imag() - d.radius,
                        d.center.real() + d.radius, d.center.imag() + d.radius}};
                if (e.box.x1 < bx0 || e.box.x0 > bx1 || e.box.y1 < by0
                    || e.box.y0 > by1)
                {
                    continue;
                }
                leaves_.push_back(e);
            }
        }
        if (!leaves_.empty())
        {
            this->build(0, static_cast<std::uint32_t>(leaves_.size()));
        }
    }

    std::size_t size() const { return leaves_.size(); }

    //! Distance to the nearest indexed trace and its id; +inf beyond cutoff
    std::pair<double, std::size_t>
    nearest(Point x, double cutoff, DistanceTolerance tol = {}) const
    {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_id = 0;
        if (leaves_.empty())
        {
            return {best, 0};
        }
        struct Item
        {
            double lower;
            std::uint32_t node;  //!< node index, or npos for a piece
            std::uint32_t source;
            SegmentView view;
            bool operator<(Item const& o) const { return lower > o.lower; }
        };
        constexpr std::uint32_t piece = ~std::uint32_t{0};
        std::priority_queue<Item> queue;
        auto note = [&](double d, std::uint32_t src) {
            if (d < best)
            {
                best = d;
                best_id = sources_[src].id;
            }
        };
        auto offer_piece = [&](std::uint32_t src, SegmentView const& v) {
            PlanarPath const& path = *sources_[src].path;
            double lower;
            if (v.exact)
            {
                lower = point_segment_distance(x, v.pa, v.pb);
            }
            else
            {
                Disk d = view_disk(path, v, bound_sigmas);
                lower = std::max(0.0, std::abs(x - d.center) - d.radius);
            }
            if (lower < std::min(best, cutoff))
            {
                queue.push({lower, piece, src, v});
            }
        };
        queue.push({nodes_[0].box.distance(x), 0, 0, {}});
        while (!queue.empty())
        {
            Item it = queue.top();
            queue.pop();
            double slack = std::max(tol.absolute, tol.relative * best);
            bool exact = it.node != piece || it.view.exact;
            if (it.lower >= std::min(best, cutoff) - (exact ? 0.0 : slack))
            {
                break;
            }
            if (it.node != piece)
            {
                Node const& n = nodes_[it.node];
                if (n.count > 0)
                {
                    for (std::uint32_t k = n.first; k < n.first + n.count; ++k)
                    {
                        Leaf const& e = leaves_[k];
                        PlanarPath const& path = *sources_[e.source].path;
                        SegmentView v = root_view(path, e.segment);
                        note(std::abs(v.pa - x), e.source);
                        note(std::abs(v.pb - x), e.source);
                        offer_piece(e.source, v);
                    }
                    continue;
                }
                for (std::uint32_t c : {n.left, n.right})
                {
                    double lower = nodes_[c].box.distance(x);
                    if (lower < std::min(best, cutoff))
                    {
                        queue.push({lower, c, 0, {}});
                    }
                }
                continue;
            }
            PlanarPath const& path = *sources_[it.source].path;
            SegmentView const& v = it.view;
            if (v.exact)
            {
                note(it.lower, it.source);
                continue;
            }
            Disk d = view_disk(path, v, bound_sigmas);
            if (!v.can_split() || d.radius <= slack)
            {
                note(point_segment_distance(x, v.pa, v.pb), it.source);
                continue;
            }
            auto [l, r] = split_view(path, v);
            note(std::abs(l.pb - x), it.source);
            offer_piece(it.source, l);
            offer_piece(it.source, r);
        }
        if (!(best < cutoff))
        {
            return {std::numeric_limits<double>::infinity(), 0};
        }
        return {best, best_id};
    }

  private:
    struct Box
    {
        double x0, y0, x1, y1;

        double distance(Point p) const
        {
            double dx = std::max({x0 - p.real(), 0.0, p.real() - x1});
            double dy = std::max({y0 - p.imag(), 0.0, p.imag() - y1});
            return std::hypot(dx, dy);
        }
    };
    struct Leaf
    {
        std::uint32_t source;
        std::uint32_t segment;
        Box box;
    };
    struct Node
    {
        Box box;
        std::uint32_t left{0};
        std::uint32_t right{0};
        std::uint32_t first{0};
        std::uint32_t count{0};  //!< nonzero for leaf nodes
    };

    std::vector<Source> sources_;
    std::vector<Leaf> leaves_;
    std::vector<Node> nodes_;

    std::uint32_t build(std::uint32_t lo, std::uint32_t hi)
    {
        Box b{std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity()};
        for (std::uint32_t k = lo; k < hi; ++k)
        {
            Box const& e = leaves_[k].box;
            b = {std::min(b.x0, e.x0), std::min(b.y0, e.y0),
                 std::max(b.x1, e.x1), std::max(b.y1, e.y1)};
        }
        auto id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back({b});
        if (hi - lo <= 8)
        {
            nodes_[id].first = lo;
            nodes_[id].count = hi - lo;
            return id;
        }
        bool by_x = b.x1 - b.x0 >= b.y1 - b.y0;
        std::uint32_t mid = lo + (hi - lo) / 2;
        std::nth_element(leaves_.begin() + lo, leaves_.begin() + mid,
                         leaves_.begin() + hi, [&](Leaf const& p, Leaf const& q) {
                             return by_x ? p.box.x0 + p.box.x1 < q.box.x0 + q.box.x1
                                         : p.box.y0 + p.box.y1 < q.box.y0 + q.box.y1;
                         });
        std::uint32_t left = this->build(lo, mid);
        std::uint32_t right = this->build(mid, hi);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }
};

//---------------------------------------------------------------------------//
/*!
 * Distances from x to the nearest trajectories of the level-alpha field.
 */
struct DistanceProfile
{
    Point x;
    std::vector<double> distances;
    std::vector<std::size_t> trajectory_ids;
};

inline DistanceProfile distance_profile(InterlacementField const& field,
                                        double alpha, Point x,
                                        std::size_t j_max, double r_query,
                                        DistanceTolerance tol = {})
{
    if (!(r_query >= min_probe_radius))
    {
        throw std::invalid_argument(
            "distance_profile: query radius below the resolvable scale 1e-3");
    }
    if (j_max < 1)
    {
        throw std::invalid_argument("distance_profile: j_max must be >= 1");
    }
    double rx = std::abs(x);
    if (rx > 0 && rx < 1)
    {
        throw std::invalid_argument(
            "distance_profile: point inside the unit disk other than 0");
    }
    DistanceProfile p;
    p.x = x;
    std::vector<std::pair<double, std::size_t>> found;
    for (auto i : field.restrict(alpha))
    {
        auto const& e = field.entries[i];
        // The scaled moustache lies outside B(rho)
        if (e.scale.rho - rx >= r_query)
        {
            continue;
        }
        double d = moustache_distance(e.moustache, x, r_query, tol);
        if (d < r_query)
        {
            found.emplace_back(d, e.scale.index);
        }
    }
    std::sort(found.begin(), found.end());
    double prev = -1;
    for (auto const& [d, id] : found)
    {
        if (p.distances.size() >= j_max)
        {
            break;
        }
        double v = d > prev ? d : std::nextafter(prev, 2 * prev + 1);
        p.distances.push_back(v);
        p.trajectory_ids.push_back(id);
        prev = v;
    }
    return p;
}

//---------------------------------------------------------------------------//
// RASTER
//---------------------------------------------------------------------------//
/*!
 * Square cell grid with a blocked mask.
 *
 * Cell (i, j) covers [x0 + i h, x0 + (i+1) h] x [y0 + j h, y0 + (j+1) h].
 */
class RasterGrid
{
  public:
    RasterGrid(RasterWindow w, double h) : window_{w}, h_{h}
    {
        if (!(h > 0) || !(w.half_width > 0))
        {
            throw std::invalid_argument("RasterGrid: bad resolution or window");
        }
        n_ = static_cast<int>(std::ceil(2 * w.half_width / h - 1e-9));
        x0_ = w.center.real() - 0.5 * n_ * h;
        y0_ = w.center.imag() - 0.5 * n_ * h;
        blocked_.assign(static_cast<std::size_t>(n_) * n_, 0);
    }

    int n() const { return n_; }
    double h() const { return h_; }
    RasterWindow const& window() const { return window_; }
    double x0() const { return x0_; }
    double y0() const { return y0_; }
    double x1() const { return x0_ + n_ * h_; }
    double y1() const { return y0_ + n_ * h_; }

    std::size_t index(int i, int j) const
    {
        return static_cast<std::size_t>(j) * n_ + i;
    }
    bool blocked(int i, int j) const { return blocked_[this->index(i, j)]; }
    std::vector<std::uint8_t> const& mask() const { return blocked_; }

    Point cell_center(std::size_t idx) const
    {
        int i = static_cast<int>(idx % n_);
        int j = static_cast<int>(idx / n_);
        return {x0_ + (i + 0.5) * h_, y0_ + (j + 0.5) * h_};
    }

    std::optional<std::pair<int, int>> cell_of(Point p) const
    {
        int i = static_cast<int>(std::floor((p.real() - x0_) / h_));
        int j = static_cast<int>(std::floor((p.imag() - y0_) / h_));
        if (i < 0 || j < 0 || i >= n_ || j >= n_)
        {
            return std::nullopt;
        }
        return std::pair{i, j};
    }

    //! Whether the closed disk meets the grid box
    bool disk_meets_box(Disk const& d) const
    {
        double cx = std::clamp(d.center.real(), x0_, this->x1());
        double cy = std::clamp(d.center.imag(), y0_, this->y1());
        return std::abs(d.center - Point{cx, cy}) <= d.radius;
    }

    //! Block every closed cell met by the segment [a, b]
    void block_segment(Point a, Point b)
    {
        double len = std::abs(b - a);
        int pieces = std::max(1, static_cast<int>(std::ceil(len / h_)));
        if (pieces > 4 * n_ + 16)
        {
            // Long chord: clip to the box first
            auto clipped = this->clip(a, b, 0.0);
            if (!clipped)
            {
                return;
            }
            a = clipped->first;
            b = clipped->second;
            len = std::abs(b - a);
            pieces = std::max(1, static_cast<int>(std::ceil(len / h_)));
        }
        for (int k = 0; k < pieces; ++k)
        {
            Point p = a + (b - a) * (double(k) / pieces);
            Point q = a + (b - a) * (double(k + 1) / pieces);
            this->block_short(p, q);
        }
    }

    void block_cell(int i, int j) { blocked_[this->index(i, j)] = 1; }

  private:
    RasterWindow window_;
    double h_;
    int n_{0};
    double x0_{0};
    double y0_{0};
    std::vector<std::uint8_t> blocked_;

    //! Liang-Barsky clip against a box grown by pad
    std::optional<std::pair<Point, Point>>
    clip_box(Point a, Point b, double bx0, double by0, double bx1,
             double by1) const
    {
        double t0 = 0, t1 = 1;
        double dx = b.real() - a.real();
        double dy = b.imag() - a.imag();
        double p[4] = {-dx, dx, -dy, dy};
        double q[4] = {a.real() - bx0, bx1 - a.real(), a.imag() - by0,
                       by1 - a.imag()};
        for (int k = 0; k < 4; ++k)
        {
            if (p[k] == 0)
            {
                if (q[k] < 0)
                {
                    return std::nullopt;
                }
                continue;
            }
            double t = q[k] / p[k];
            if (p[k] < 0)
            {
                t0 = std::max(t0, t);
            }
            else
            {
                t1 = std::min(t1, t);
            }
            if (t0 > t1)
            {
                return std::nullopt;
            }
        }
        return std::pair{a + t0 * (b - a), a + t1 * (b - a)};
    }

    std::optional<std::pair<Point, Point>> clip(Point a, Point b, double pad) const
    {
        return this->clip_box(a, b, x0_ - pad, y0_ - pad, this->x1() + pad,
                              this->y1() + pad);
    }

    void block_short(Point a, Point b)
    {
        double lo_x = (std::min(a.real(), b.real()) - x0_) / h_;
        double hi_x = (std::max(a.real(), b.real()) - x0_) / h_;
        double lo_y = (std::min(a.imag(), b.imag()) - y0_) / h_;
        double hi_y = (std::max(a.imag(), b.imag()) - y0_) / h_;
        int i0 = std::max(0, static_cast<int>(std::floor(lo_x)) - (std::floor(lo_x) == lo_x ? 1 : 0));
        int i1 = std::min(n_ - 1, static_cast<int>(std::floor(hi_x)));
        int j0 = std::max(0, static_cast<int>(std::floor(lo_y)) - (std::floor(lo_y) == lo_y ? 1 : 0));
        int j1 = std::min(n_ - 1, static_cast<int>(std::floor(hi_y)));
        for (int j = j0; j <= j1; ++j)
        {
            for (int i = i0; i <= i1; ++i)
            {
                if (blocked_[this->index(i, j)])
                {
                    continue;
                }
                double cx0 = x0_ + i * h_;
                double cy0 = y0_ + j * h_;
                if (this->clip_box(a, b, cx0, cy0, cx0 + h_, cy0 + h_))
                {
                    blocked_[this->index(i, j)] = 1;
                }
            }
        }
    }
};

/*!
 * Block the cells met by a refined trace.
 *
 * Pieces are bisected until their one-sigma spread is at most h/2, and the
 * chord of each accepted piece is rasterized.
 */
inline void rasterize_path(RasterGrid& grid, PlanarPath const& path)
{
    double h = grid.h();
    traverse_path(
        path,
        [&](SegmentView const& v) {
            Disk d = view_disk(path, v, bound_sigmas);
            if (!grid.disk_meets_box(d))
            {
                return Visit::prune;
            }
            if (v.exact)
            {
                return Visit::leaf;
            }
            Disk spread = view_disk(path, v, 1.0);
            return spread.radius <= 0.5 * h ? Visit::leaf : Visit::split;
        },
        [&](SegmentView const& v) {
            grid.block_segment(v.pa, v.pb);
            return false;
        });
}

//---------------------------------------------------------------------------//
/*!
 * Grid-resolved connected component of the vacant set.
 */
struct RasterComponent
{
    double resolution{0};
    RasterWindow window;
    int n{0};
    double x0{0};
    double y0{0};
    std::vector<std::size_t> cells;  //!< sorted cell indices (j * n + i)
    Point seed_point;
    bool touches_window_boundary{false};
    bool empty{true};

    double area() const
    {
        return static_cast<double>(cells.size()) * resolution * resolution;
    }

    Point cell_center(std::size_t idx) const
    {
        int i = static_cast<int>(idx % n);
        int j = static_cast<int>(idx / n);
        return {x0 + (i + 0.5) * resolution, y0 + (j + 0.5) * resolution};
    }

    //! Largest distance from the seed, on cell centers plus half a diagonal
    double rad() const
    {
        double r = 0;
        for (auto c : cells)
        {
            r = std::max(r, std::abs(this->cell_center(c) - seed_point));
        }
        return cells.empty() ? 0.0 : r + resolution * std::numbers::sqrt2 / 2;
    }

    bool contains(Point p) const
    {
        int i = static_cast<int>(std::floor((p.real() - x0) / resolution));
        int j = static_cast<int>(std::floor((p.imag() - y0) / resolution));
        if (i < 0 || j < 0 || i >= n || j >= n)
        {
            return false;
        }
        auto idx = static_cast<std::size_t>(j) * n + i;
        return std::binary_search(cells.begin(), cells.end(), idx);
    }

    //! Number of cell edges between the component and its complement
    std::size_t perimeter_edges() const
    {
        std::size_t e = 0;
        for (auto c : cells)
        {
            int i = static_cast<int>(c % n);
            int j = static_cast<int>(c / n);
            int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (auto& q : nb)
            {
                if (q[0] < 0 || q[1] < 0 || q[0] >= n || q[1] >= n)
                {
                    ++e;
                    continue;
                }
                auto k = static_cast<std::size_t>(q[1]) * n + q[0];
                if (!std::binary_search(cells.begin(), cells.end(), k))
                {
                    ++e;
                }
            }
        }
        return e;
    }
};

//! 4-connected flood fill of unblocked cells from the seed
inline RasterComponent flood_component(RasterGrid const& grid, Point seed)
{
    RasterComponent c;
    c.resolution = grid.h();
    c.window = grid.window();
    c.n = grid.n();
    c.x0 = grid.x0();
    c.y0 = grid.y0();
    c.seed_point = seed;
    auto start = grid.cell_of(seed);
    if (!start || grid.blocked(start->first, start->second))
    {
        return c;
    }
    int n = grid.n();
    std::vector<std::uint8_t> seen(grid.mask().size(), 0);
    std::deque<std::pair<int, int>> todo{*start};
    seen[grid.index(start->first, start->second)] = 1;
    while (!todo.empty())
    {
        auto [i, j] = todo.front();
        todo.pop_front();
        c.cells.push_back(grid.index(i, j));
        if (i == 0 || j == 0 || i == n - 1 || j == n - 1)
        {
            c.touches_window_boundary = true;
        }
        int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
        for (auto& q : nb)
        {
            if (q[0] < 0 || q[1] < 0 || q[0] >= n || q[1] >= n)
            {
                continue;
            }
            auto k = grid.index(q[0], q[1]);
            if (seen[k] || grid.blocked(q[0], q[1]))
            {
                continue;
            }
            seen[k] = 1;
            todo.emplace_back(q[0], q[1]);
        }
    }
    std::sort(c.cells.begin(), c.cells.end());
    c.empty = c.cells.empty();
    return c;
}

inline void check_resolution(double h, RasterWindow const& w, char const* who)
{
    if (!(h > 0) || h > w.half_width / 64 * (1 + 1e-12))
    {
        throw std::invalid_argument(std::string(who)
                                    + ": resolution must be at most 2^-6 "
                                      "times the window radius");
    }
}

//! Component of seed among the given traces
inline RasterComponent
extract_component_paths(std::vector<PlanarPath const*> const& paths, Point seed,
                        double resolution, RasterWindow window)
{
    check_resolution(resolution, window, "extract_component");
    RasterGrid grid(window, resolution);
    for (auto const* p : paths)
    {
        rasterize_path(grid, *p);
    }
    return flood_component(grid, seed);
}

//! Largest |z| of the grid box around the window center
inline double window_reach(RasterWindow const& w)
{
    return std::abs(w.center) + w.half_width * std::numbers::sqrt2;
}

inline RasterComponent extract_component(InterlacementField const& field,
                                         double alpha, Point seed,
                                         double resolution, RasterWindow window)
{
    std::vector<PlanarPath const*> paths;
    double reach = window_reach(window);
    for (auto i : field.restrict(alpha))
    {
        auto const& e = field.entries[i];
        if (e.scale.rho > reach)
        {
            continue;
        }
        paths.push_back(&e.moustache.branch_pos);
        paths.push_back(&e.moustache.branch_neg);
    }
    return extract_component_paths(paths, seed, resolution, window);
}

//! Radius of the origin's component, or nullopt when it reaches the window
inline std::optional<double> amoeba_radius(Moustache const& m, double resolution,
                                           double window)
{
    if (!(window >= 4))
    {
        throw std::invalid_argument("amoeba_radius: window must be at least 4");
    }
    auto c = extract_component_paths({&m.branch_pos, &m.branch_neg},
                                     Point{0, 0}, resolution,
                                     RasterWindow{{0, 0}, window});
    if (c.touches_window_boundary)
    {
        return std::nullopt;
    }
    return c.rad();
}

//---------------------------------------------------------------------------//
// LOG-POLAR RASTER
//---------------------------------------------------------------------------//
/*!
 * Component of the inner disk B(e^log_inner) on a log-polar grid.
 *
 * Rows are log-radius bands of width cell starting at log_inner, columns
 * are angular sectors of width cell = 2 pi / cols; the angle wraps.
 */
struct LogPolarComponent
{
    int rows{0};
    int cols{0};
    double cell{0};
    double log_inner{0};
    std::vector<std::size_t> cells;  //!< sorted indices row * cols + col
    int top_row{-1};
    bool touches_outer{false};

    //! Upper bound on |z| over the component (the inner disk included)
    double rad() const
    {
        return std::exp(log_inner + (top_row + 1) * cell);
    }
    bool contains(std::size_t idx) const
    {
        return std::binary_search(cells.begin(), cells.end(), idx);
    }
};

/*!
 * Blocked-cell mask on the annulus e^log_inner <= |z| < e^log_outer in
 * log-polar coordinates; cell sides are equal in (ln r, theta).
 */
class LogPolarGrid
{
  public:
    LogPolarGrid(double log_inner, double log_outer, int cols)
        : li_{log_inner}, cols_{cols}, d_{2 * std::numbers::pi / cols}
    {
        if (cols < 8 || !(log_outer > log_inner))
        {
            throw std::invalid_argument("LogPolarGrid: bad extent or columns");
        }
        rows_ = static_cast<int>(std::ceil((log_outer - log_inner) / d_ - 1e-9));
        mask_.assign(static_cast<std::size_t>(rows_) * cols_, 0);
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double cell() const { return d_; }
    double log_inner() const { return li_; }
    double log_outer() const { return li_ + rows_ * d_; }
    std::vector<std::uint8_t> const& mask() const { return mask_; }
    bool blocked(std::size_t idx) const { return mask_[idx]; }

    //! Block every cell met by the box [u0, u1] x [t0, t1]
    void block_box(double u0, double u1, double t0, double t1)
    {
        this->for_box(u0, u1, t0, t1, [&](std::size_t k) {
            mask_[k] = 1;
            return false;
        });
    }

    //! Whether every cell met by the box is already blocked
    bool covered(double u0, double u1, double t0, double t1) const
    {
        return !this->for_box(u0, u1, t0, t1,
                              [&](std::size_t k) { return !mask_[k]; });
    }

    //! Whether the box meets a cell of the given sorted index set
    bool box_meets(double u0, double u1, double t0, double t1,
                   std::vector<std::uint8_t> const& flags) const
    {
        return this->for_box(u0, u1, t0, t1,
                             [&](std::size_t k) { return flags[k] != 0; });
    }

    //! Block the cells met by a chord in (ln r, theta)
    void block_chord(double u0, double t0, double u1, double t1)
    {
        this->walk_chord(u0, t0, u1, t1, [&](double a, double b, double c, double d) {
            this->block_box(a, b, c, d);
            return false;
        });
    }

    //! Whether a chord meets a flagged cell
    bool chord_meets(double u0, double t0, double u1, double t1,
                     std::vector<std::uint8_t> const& flags) const
    {
        return this->walk_chord(u0, t0, u1, t1,
                                [&](double a, double b, double c, double d) {
                                    return this->box_meets(a, b, c, d, flags);
                                });
    }

    //! Flood fill from the inner disk, 4-connected with angular wrap
    LogPolarComponent flood() const
    {
        LogPolarComponent c;
        c.rows = rows_;
        c.cols = cols_;
        c.cell = d_;
        c.log_inner = li_;
        std::vector<std::uint8_t> seen(mask_.size(), 0);
        std::deque<std::size_t> todo;
        for (int j = 0; j < cols_; ++j)
        {
            if (!mask_[j])
            {
                seen[j] = 1;
                todo.push_back(j);
            }
        }
        while (!todo.empty())
        {
            std::size_t k = todo.front();
            todo.pop_front();
            c.cells.push_back(k);
            int r = static_cast<int>(k / cols_);
            int col = static_cast<int>(k % cols_);
            c.top_row = std::max(c.top_row, r);
            if (r == rows_ - 1)
            {
                c.touches_outer = true;
            }
            int nb[4][2] = {{r - 1, col},
                            {r + 1, col},
                            {r, (col + 1) % cols_},
                            {r, (col + cols_ - 1) % cols_}};
            for (auto& q : nb)
            {
                if (q[0] < 0 || q[0] >= rows_)
                {
                    continue;
                }
                auto kk = static_cast<std::size_t>(q[0]) * cols_ + q[1];
                if (seen[kk] || mask_[kk])
                {
                    continue;
                }
                seen[kk] = 1;
                todo.push_back(kk);
            }
        }
        std::sort(c.cells.begin(), c.cells.end());
        return c;
    }

  private:
    double li_;
    int cols_;
    double d_;
    int rows_{0};
    std::vector<std::uint8_t> mask_;

    //! Visit cells met by a box; stops and returns true when fn does
    template<class Fn>
    bool for_box(double u0, double u1, double t0, double t1, Fn&& fn) const
    {
        int r0 = std::max(0, static_cast<int>(std::floor((u0 - li_) / d_)));
        int r1 = std::min(rows_ - 1, static_cast<int>(std::floor((u1 - li_) / d_)));
        if (r0 > r1)
        {
            return false;
        }
        double c0 = std::floor(t0 / d_);
        double c1 = std::floor(t1 / d_);
        if (c1 - c0 >= cols_)
        {
            c0 = 0;
            c1 = cols_ - 1;
        }
        for (int r = r0; r <= r1; ++r)
        {
            for (double cf = c0; cf <= c1; cf += 1)
            {
                long col = static_cast<long>(cf) % cols_;
                col += col < 0 ? cols_ : 0;
                if (fn(static_cast<std::size_t>(r) * cols_ + static_cast<std::size_t>(col)))
                {
                    return true;
                }
            }
        }
        return false;
    }

    //! Cut a chord into pieces no longer than half a cell
    template<class Fn>
    bool walk_chord(double u0, double t0, double u1, double t1, Fn&& fn) const
    {
        double len = std::hypot(u1 - u0, t1 - t0);
        int k = std::max(1, static_cast<int>(std::ceil(2 * len / d_)));
        for (int i = 0; i < k; ++i)
        {
            double a = static_cast<double>(i) / k;
            double b = static_cast<double>(i + 1) / k;
            double ua = u0 + (u1 - u0) * a, ub = u0 + (u1 - u0) * b;
            double ta = t0 + (t1 - t0) * a, tb = t0 + (t1 - t0) * b;
            if (fn(std::min(ua, ub), std::max(ua, ub), std::min(ta, tb),
                   std::max(ta, tb)))
            {
                return true;
            }
        }
        return false;
    }
};

/*!
 * Visit the log-polar chords of a trace at the grid's resolution.
 *
 * Skew-chart traces centered at 0 are refined in the chart itself, where
 * (ln r, theta) is affine in the lifted state; other traces are refined in
 * the plane until a piece spans at most half a cell in log-polar terms.
 * Pieces whose bounding box misses [u_lo, u_hi] or that skip() rejects are
 * pruned. chord(u0, t0, u1, t1) returns true to stop.
 */
template<class Skip, class Chord>
bool visit_log_polar(PlanarPath const& path, double cell, double u_lo,
                     double u_hi, Skip&& skip, Chord&& chord)
{
    if (path.chart == Chart::skew && path.frame.center == Point{0, 0})
    {
        double base = std::log(path.frame.scale) + path.frame.log_offset;
        double ao = path.frame.angle_offset;
        return traverse_path(
            path,
            [&](SegmentView const& v) {
                LiftedState m;
                double d2 = 0;
                for (int i = 0; i < 4; ++i)
                {
                    m[i] = 0.5 * (v.sa[i] + v.sb[i]);
                    double d = v.sb[i] - v.sa[i];
                    d2 += d * d;
                }
                double sigma = std::sqrt(v.tb - v.ta);
                double half = 0.5 * std::sqrt(d2);
                double uc = base + PlanarPath::lifted_radius(m);
                double tc = ao + m[3];
                double reach = half + bound_sigmas * sigma;
                if (uc + reach < u_lo || uc - reach > u_hi
                    || skip(uc - reach, uc + reach, tc - reach, tc + reach))
                {
                    return Visit::prune;
                }
                return half + sigma <= 0.5 * cell ? Visit::leaf : Visit::split;
            },
            [&](SegmentView const& v) {
                return chord(base + PlanarPath::lifted_radius(v.sa), ao + v.sa[3],
                             base + PlanarPath::lifted_radius(v.sb), ao + v.sb[3]);
            });
    }
    return traverse_path(
        path,
        [&](SegmentView const& v) {
            Disk d = view_disk(path, v, bound_sigmas);
            double rc = std::abs(d.center);
            if (d.radius >= rc)
            {
                return v.can_split() ? Visit::split : Visit::leaf;
            }
            double ulo = std::log(rc - d.radius);
            double uhi = std::log(rc + d.radius);
            double span = std::asin(d.radius / rc);
            double tc = std::arg(d.center);
            if (uhi < u_lo || ulo > u_hi || skip(ulo, uhi, tc - span, tc + span))
            {
                return Visit::prune;
            }
            Disk spread = v.exact ? d : view_disk(path, v, 1.0);
            bool small = spread.radius < 0.25 * cell * (rc - spread.radius);
            return small || v.exact ? Visit::leaf : Visit::split;
        },
        [&](SegmentView const& v) {
            // Explicit chords are cut so each piece spans at most half a cell
            double ra = std::abs(v.pa), rb = std::abs(v.pb);
            double lo = std::max(std::min(ra, rb) - std::abs(v.pb - v.pa), 1e-300);
            int k = std::max(1, static_cast<int>(std::ceil(
                                    2 * std::abs(v.pb - v.pa) / (cell * lo))));
            k = std::min(k, 1 << 20);
            for (int i = 0; i < k; ++i)
            {
                Point a = v.pa + (v.pb - v.pa) * (static_cast<double>(i) / k);
                Point b = v.pa + (v.pb - v.pa) * (static_cast<double>(i + 1) / k);
                if (std::abs(a) == 0 || std::abs(b) == 0)
                {
                    continue;
                }
                double ta = std::arg(a);
                double tb = ta + std::arg(b / a);
                if (chord(std::log(std::abs(a)), ta, std::log(std::abs(b)), tb))
                {
                    return true;
                }
            }
            return false;
        });
}

//! Block the cells met by a trace
inline void rasterize_log_polar(LogPolarGrid& grid, PlanarPath const& path)
{
    visit_log_polar(
        path, grid.cell(), grid.log_inner(), grid.log_outer(),
        [&](double u0, double u1, double t0, double t1) {
            return grid.covered(u0, u1, t0, t1);
        },
        [&](double u0, double t0, double u1, double t1) {
            grid.block_chord(u0, t0, u1, t1);
            return false;
        });
}

//! Whether a trace meets a flagged cell of the grid
inline bool trace_meets_cells(LogPolarGrid const& grid, PlanarPath const& path,
                              std::vector<std::uint8_t> const& flags,
                              double u_hi)
{
    return visit_log_polar(
        path, grid.cell(), grid.log_inner(), std::min(u_hi, grid.log_outer()),
        [&](double u0, double u1, double t0, double t1) {
            return !grid.box_meets(u0, u1, t0, t1, flags);
        },
        [&](double u0, double t0, double u1, double t1) {
            return grid.chord_meets(u0, t0, u1, t1, flags);
        });
}

/*!
 * Radius of the origin's component for one moustache on a log-polar grid
 * out to radius window; nullopt when the component reaches it.
 */
inline std::optional<double> amoeba_radius_log_polar(Moustache const& m,
                                                     int angular_cells,
                                                     double window)
{
    if (!(window >= 4))
    {
        throw std::invalid_argument("amoeba_radius: window must be at least 4");
    }
    LogPolarGrid grid(0.0, std::log(window), angular_cells);
    rasterize_log_polar(grid, m.branch_pos);
    rasterize_log_polar(grid, m.branch_neg);
    auto c = grid.flood();
    if (c.touches_outer)
    {
        return std::nullopt;
    }
    return std::min(c.rad(), window);
}

/*!
 * Comparison of the origin's component with the component cut out by the
 * nearest trajectory alone.
 */
struct NearestCellResult
{
    bool differs{false};
    bool censored{false};  //!< nearest-only component reaches the grid edge
    double nearest_rad{0};  //!< relative to the nearest scale
    std::size_t blocking_id{0};
};

/*!
 * Whether some other trajectory of the level-alpha field meets the
 * component of 0 in the complement of the nearest trajectory.
 *
 * The grid spans e^log_span scales above the nearest scale. A censored
 * result counts as differing unless a meeting trajectory was found.
 */
inline NearestCellResult nearest_cell_check(InterlacementField const& field,
                                            double alpha, int angular_cells,
                                            double log_span)
{
    auto ids = field.restrict(alpha);
    NearestCellResult out;
    if (ids.empty())
    {
        out.censored = true;
        out.differs = true;
        return out;
    }
    auto const& near = field.entries[ids.front()];
    double l0 = std::log(near.scale.rho);
    LogPolarGrid grid(l0, l0 + log_span, angular_cells);
    rasterize_log_polar(grid, near.moustache.branch_pos);
    rasterize_log_polar(grid, near.moustache.branch_neg);
    auto comp = grid.flood();
    out.censored = comp.touches_outer;
    out.nearest_rad = comp.rad() / near.scale.rho;
    std::vector<std::uint8_t> flags(grid.mask().size(), 0);
    for (auto k : comp.cells)
    {
        flags[k] = 1;
    }
    double u_hi = l0 + (comp.top_row + 1) * grid.cell();
    for (std::size_t k = 1; k < ids.size(); ++k)
    {
        auto const& e = field.entries[ids[k]];
        if (std::log(e.scale.rho) > u_hi)
        {
            break;
        }
        if (trace_meets_cells(grid, e.moustache.branch_pos, flags, u_hi)
            || trace_meets_cells(grid, e.moustache.branch_neg, flags, u_hi))
        {
            out.differs = true;
            out.blocking_id = e.scale.index;
            return out;
        }
    }
    out.differs = out.censored;
    return out;
}

//---------------------------------------------------------------------------//
/*!
 * Distances from equally spaced points of the unit circle to the field.
 *
 * m_hat is the exact minimum over the whole circle, which equals the
 * smallest modulus on the traces minus one; M_hat is the sampled maximum.
 * Points with no trajectory within r_query report r_query.
 */
struct BoundaryProfile
{
    double alpha{0};
    std::vector<double> sample_angles;
    std::vector<double> phi_values;
    double m_hat{0};
    double M_hat{0};
    std::size_t censored{0};
};

inline double field_min_modulus(InterlacementField const& field,
                                std::vector<std::size_t> const& ids)
{
    double best = std::numeric_limits<double>::infinity();
    for (auto i : ids)
    {
        auto const& e = field.entries[i];
        if (e.scale.rho >= best)
        {
            break;
        }
        best = std::min({best, path_min_modulus(e.moustache.branch_pos),
                         path_min_modulus(e.moustache.branch_neg)});
    }
    return best;
}

//! Profile at the given angles of the unit circle
inline BoundaryProfile boundary_profile_at(InterlacementField const& field,
                                           double alpha,
                                           std::vector<double> const& angles,
                                           double r_query,
                                           DistanceTolerance tol = {})
{
    if (angles.size() < 8)
    {
        throw std::invalid_argument("boundary_profile: need at least 8 points");
    }
    if (!(r_query >= min_probe_radius))
    {
        throw std::invalid_argument(
            "boundary_profile: query radius below the resolvable scale 1e-3");
    }
    BoundaryProfile bp;
    bp.alpha = alpha;
    auto ids = field.restrict(alpha);
    std::vector<TraceIndex::Source> sources;
    for (auto i : ids)
    {
        auto const& e = field.entries[i];
        if (e.scale.rho - 1 >= r_query)
        {
            break;
        }
        sources.push_back({&e.moustache.branch_pos, e.scale.index});
        sources.push_back({&e.moustache.branch_neg, e.scale.index});
    }
    double half = 1 + r_query;
    TraceIndex index(std::move(sources), RasterWindow{{0, 0}, half});
    for (double th : angles)
    {
        Point x = std::polar(1.0, th);
        double best = std::min(r_query, index.nearest(x, r_query, tol).first);
        if (!(best < r_query))
        {
            ++bp.censored;
        }
        bp.sample_angles.push_back(th);
        bp.phi_values.push_back(best);
    }
    bp.M_hat = *std::max_element(bp.phi_values.begin(), bp.phi_values.end());
    double exact = field_min_modulus(field, ids) - 1;
    bp.m_hat = std::min(exact,
                        *std::min_element(bp.phi_values.begin(),
                                          bp.phi_values.end()));
    return bp;
}

/*!
 * Largest nearest-trajectory distance over the given boundary angles.
 *
 * Stored vertices lie on the traces, so the nearest vertex bounds each
 * distance from above; points are resolved in decreasing order of that
 * bound until no remaining bound exceeds the running maximum.
 */
inline double boundary_max_distance(InterlacementField const& field,
                                    double alpha,
                                    std::vector<double> const& angles,
                                    double r_query, DistanceTolerance tol = {})
{
    std::vector<TraceIndex::Source> sources;
    std::vector<Point> verts;
    for (auto i : field.restrict(alpha))
    {
        auto const& e = field.entries[i];
        if (e.scale.rho - 1 >= r_query)
        {
            break;
        }
        for (auto const* p : {&e.moustache.branch_pos, &e.moustache.branch_neg})
        {
            sources.push_back({p, e.scale.index});
            for (auto v : p->vertices)
            {
                if (std::abs(v) < 1 + r_query)
                {
                    verts.push_back(v);
                }
            }
        }
    }
    double half = 1 + r_query;
    // Vertex buckets for upper bounds
    int n = 128;
    double cell = 2 * half / n;
    std::vector<std::vector<Point>> buckets(static_cast<std::size_t>(n) * n);
    auto bucket_of = [&](Point p) {
        int i = std::clamp(static_cast<int>(std::floor((p.real() + half) / cell)), 0, n - 1);
        int j = std::clamp(static_cast<int>(std::floor((p.imag() + half) / cell)), 0, n - 1);
        return std::pair{i, j};
    };
    for (auto v : verts)
    {
        auto [i, j] = bucket_of(v);
        buckets[static_cast<std::size_t>(j) * n + i].push_back(v);
    }
    std::vector<std::pair<double, double>> upper;
    for (double th : angles)
    {
        Point x = std::polar(1.0, th);
        auto [ci, cj] = bucket_of(x);
        double best = r_query;
        for (int ring = 0; ring <= n && (ring - 1) * cell < best; ++ring)
        {
            for (int j = cj - ring; j <= cj + ring; ++j)
            {
                for (int i = ci - ring; i <= ci + ring; ++i)
                {
                    if (std::max(std::abs(i - ci), std::abs(j - cj)) != ring
                        || i < 0 || j < 0 || i >= n || j >= n)
                    {
                        continue;
                    }
                    for (auto v : buckets[static_cast<std::size_t>(j) * n + i])
                    {
                        best = std::min(best, std::abs(v - x));
                    }
                }
            }
        }
        upper.emplace_back(best, th);
    }
    std::sort(upper.begin(), upper.end(), std::greater<>());
    TraceIndex index(std::move(sources), RasterWindow{{0, 0}, half});
    double m = 0;
    for (auto const& [ub, th] : upper)
    {
        if (ub <= m)
        {
            break;
        }
        Point x = std::polar(1.0, th);
        double d = index.nearest(x, std::nextafter(ub, 2 * ub + 1), tol).first;
        m = std::max(m, std::min(d, ub));
    }
    return m;
}

//! Equally spaced angles 2 pi k / n
inline std::vector<double> circle_angles(std::size_t n)
{
    std::vector<double> a(n);
    for (std::size_t k = 0; k < n; ++k)
    {
        a[k] = 2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    }
    return a;
}

//! Boundary sampling count ceil(40 sqrt(2 alpha / ln alpha)), at least 8
inline std::size_t boundary_points_for(double alpha)
{
    if (!(alpha > 1))
    {
        return 64;
    }
    double n = std::ceil(40 * std::sqrt(2 * alpha / std::log(alpha)));
    return std::max<std::size_t>(8, static_cast<std::size_t>(n));
}

inline BoundaryProfile boundary_profile(InterlacementField const& field,
                                        double alpha, std::size_t n_points,
                                        double r_query,
                                        DistanceTolerance tol = {})
{
    if (n_points < 8)
    {
        throw std::invalid_argument("boundary_profile: need at least 8 points");
    }
    return boundary_profile_at(field, alpha, circle_angles(n_points), r_query,
                               tol);
}

//---------------------------------------------------------------------------//
/*!
 * Whether a trace separates B(1) from the window boundary at raster scale.
 *
 * The window is the square of half-width 2r + 2h around the origin, with r
 * the modulus of the first vertex.
 */
inline bool check_disconnection(PlanarPath const& path, double resolution)
{
    if (path.vertices.empty())
    {
        return false;
    }
    double r = std::abs(path.vertices.front());
    RasterWindow w{{0, 0}, 2 * r + 2 * resolution};
    RasterGrid grid(w, resolution);
    rasterize_path(grid, path);
    auto c = flood_component(grid, Point{0, 0});
    return !c.empty && !c.touches_window_boundary;
}

//---------------------------------------------------------------------------//
// EXPORT
//---------------------------------------------------------------------------//
//! Row-wise run-length encoding: "j: start+len start+len ..." per row
inline std::string component_rle(RasterComponent const& c)
{
    std::ostringstream os;
    os << "grid " << c.n << " " << c.n << " h " << c.resolution << " origin "
       << c.x0 << " " << c.y0 << "\n";
    std::size_t k = 0;
    while (k < c.cells.size())
    {
        std::size_t row = c.cells[k] / c.n;
        os << row << ":";
        while (k < c.cells.size() && c.cells[k] / c.n == row)
        {
            std::size_t start = c.cells[k] % c.n;
            std::size_t len = 1;
            while (k + len < c.cells.size() && c.cells[k + len] == c.cells[k] + len
                   && c.cells[k + len] / c.n == row)
            {
                ++len;
            }
            os << " " << start << "+" << len;
            k += len;
        }
        os << "\n";
    }
    return os.str();
}

inline std::string component_summary(RasterComponent const& c)
{
    std::ostringstream os;
    os.precision(17);
    os << "cells = " << c.cells.size() << "\n"
       << "resolution = " << c.resolution << "\n"
       << "area = " << c.area() << "\n"
       << "rad = " << c.rad() << "\n"
       << "touches_window_boundary = "
       << (c.touches_window_boundary ? "true" : "false") << "\n";
    return os.str();
}

}  // namespace bri2d
