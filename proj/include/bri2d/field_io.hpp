#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "interlacement.hpp"

namespace bri2d
{
/*!
 * Field container: a text header of key = value lines closed by "data",
 * followed by little-endian binary entries.
 *
 * Every stored path keeps its lifted states and segment keys, so lazy
 * refinement of a loaded field reproduces the original sub-paths.
 */
inline constexpr char const* field_magic = "bri2d-field 1";

namespace detail
{
static_assert(std::endian::native == std::endian::little,
              "field_io assumes a little-endian host");

template<class T>
void put(std::ostream& os, T const& v)
{
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<char const*>(&v), sizeof(T));
}

template<class T>
void put_vec(std::ostream& os, std::vector<T> const& v)
{
    put<std::uint64_t>(os, v.size());
    if (!v.empty())
    {
        os.write(reinterpret_cast<char const*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(T)));
    }
}

template<class T>
T get(std::istream& is)
{
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is)
    {
        throw std::runtime_error("read_field: truncated data");
    }
    return v;
}

template<class T>
std::vector<T> get_vec(std::istream& is)
{
    auto n = get<std::uint64_t>(is);
    if (n > (std::uint64_t{1} << 34) / sizeof(T))
    {
        throw std::runtime_error("read_field: implausible array length");
    }
    std::vector<T> v(n);
    if (n > 0)
    {
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(n * sizeof(T)));
        if (!is)
        {
            throw std::runtime_error("read_field: truncated data");
        }
    }
    return v;
}

inline void put_path(std::ostream& os, PlanarPath const& p)
{
    put<std::uint8_t>(os, static_cast<std::uint8_t>(p.origin));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(p.chart));
    put<std::uint8_t>(os, p.truncated ? 1 : 0);
    put(os, p.frame.center.real());
    put(os, p.frame.center.imag());
    put(os, p.frame.scale);
    put(os, p.frame.log_offset);
    put(os, p.frame.angle_offset);
    put(os, p.seed);
    put(os, p.stream);
    put(os, p.grid_tolerance);
    put_vec(os, p.vertices);
    put_vec(os, p.times);
    put_vec(os, p.refinement_depth);
    put_vec(os, p.states);
    put_vec(os, p.segment_keys);
}

inline PlanarPath get_path(std::istream& is)
{
    PlanarPath p;
    auto origin = get<std::uint8_t>(is);
    auto chart = get<std::uint8_t>(is);
    if (origin > static_cast<std::uint8_t>(PathOrigin::polyline) || chart > 1)
    {
        throw std::runtime_error("read_field: bad path tag");
    }
    p.origin = static_cast<PathOrigin>(origin);
    p.chart = static_cast<Chart>(chart);
    p.truncated = get<std::uint8_t>(is) != 0;
    double cx = get<double>(is);
    double cy = get<double>(is);
    p.frame.center = {cx, cy};
    p.frame.scale = get<double>(is);
    p.frame.log_offset = get<double>(is);
    p.frame.angle_offset = get<double>(is);
    p.seed = get<std::uint64_t>(is);
    p.stream = get<std::uint64_t>(is);
    p.grid_tolerance = get<double>(is);
    p.vertices = get_vec<Point>(is);
    p.times = get_vec<double>(is);
    p.refinement_depth = get_vec<std::uint8_t>(is);
    p.states = get_vec<LiftedState>(is);
    p.segment_keys = get_vec<std::uint64_t>(is);
    if (p.times.size() != p.vertices.size()
        || (!p.states.empty() && p.states.size() != p.vertices.size()))
    {
        throw std::runtime_error("read_field: inconsistent path arrays");
    }
    return p;
}

inline std::string fmt17(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}
}  // namespace detail

inline void write_field(std::ostream& os, InterlacementField const& f)
{
    os << field_magic << '\n'
       << "alpha_max = " << detail::fmt17(f.alpha_max) << '\n'
       << "b = " << detail::fmt17(f.b) << '\n'
       << "window_radius = " << detail::fmt17(f.window_radius) << '\n'
       << "seed = " << f.seed << '\n'
       << "stream = " << f.stream << '\n'
       << "construction = " << to_string(f.construction) << '\n'
       << "coarse_dr = " << detail::fmt17(f.options.coarse_dr) << '\n'
       << "overshoot_log = " << detail::fmt17(f.options.overshoot_log) << '\n'
       << "growth = " << detail::fmt17(f.options.growth) << '\n'
       << "max_step = " << detail::fmt17(f.options.max_step) << '\n'
       << "returns = " << (f.options.returns ? 1 : 0) << '\n'
       << "entries = " << f.entries.size() << '\n'
       << "data\n";
    for (auto const& e : f.entries)
    {
        detail::put(os, e.scale.rho);
        detail::put(os, e.scale.mark);
        detail::put<std::uint64_t>(os, e.scale.index);
        detail::put(os, e.moustache.anchor_angle);
        detail::put_path(os, e.moustache.branch_pos);
        detail::put_path(os, e.moustache.branch_neg);
    }
    if (!os)
    {
        throw std::runtime_error("write_field: stream error");
    }
}

inline InterlacementField read_field(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != field_magic)
    {
        throw std::runtime_error("read_field: not a field file");
    }
    std::map<std::string, std::string> kv;
    while (std::getline(is, line) && line != "data")
    {
        auto eq = line.find(" = ");
        if (eq == std::string::npos)
        {
            throw std::runtime_error("read_field: bad header line: " + line);
        }
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    if (line != "data")
    {
        throw std::runtime_error("read_field: missing data section");
    }
    auto need = [&](char const* k) -> std::string const& {
        auto it = kv.find(k);
        if (it == kv.end())
        {
            throw std::runtime_error(std::string("read_field: missing key ") + k);
        }
        return it->second;
    };
    InterlacementField f;
    f.alpha_max = std::stod(need("alpha_max"));
    f.b = std::stod(need("b"));
    f.window_radius = std::stod(need("window_radius"));
    f.seed = std::stoull(need("seed"));
    f.stream = std::stoull(need("stream"));
    f.construction = need("construction") == "bessel" ? Construction::bessel
                                                      : Construction::moustache;
    f.options.coarse_dr = std::stod(need("coarse_dr"));
    f.options.overshoot_log = std::stod(need("overshoot_log"));
    f.options.growth = std::stod(need("growth"));
    f.options.max_step = std::stod(need("max_step"));
    f.options.returns = need("returns") != "0";
    auto n = std::stoull(need("entries"));
    f.entries.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i)
    {
        FieldEntry e;
        e.scale.rho = detail::get<double>(is);
        e.scale.mark = detail::get<double>(is);
        e.scale.index = detail::get<std::uint64_t>(is);
        e.moustache.anchor_angle = detail::get<double>(is);
        e.moustache.branch_pos = detail::get_path(is);
        e.moustache.branch_neg = detail::get_path(is);
        f.entries.push_back(std::move(e));
    }
    return f;
}

inline void save_field(std::string const& path, InterlacementField const& f)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
    {
        throw std::runtime_error("save_field: cannot open " + path);
    }
    write_field(os, f);
}

inline InterlacementField load_field(std::string const& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
    {
        throw std::runtime_error("load_field: cannot open " + path);
    }
    return read_field(is);
}

}  // namespace bri2d
