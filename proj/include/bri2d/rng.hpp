#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bri2d
{
//---------------------------------------------------------------------------//
/*!
 * Philox4x32-10 block function.
 *
 * The key is the 64-bit seed and the 128-bit counter holds a 64-bit block
 * index and a 64-bit stream identifier. Every output is a pure function of
 * (seed, stream, block).
 */
struct Philox4x32
{
    using block_type = std::array<std::uint32_t, 4>;

    static constexpr block_type
    generate(std::uint64_t seed, std::uint64_t stream, std::uint64_t block)
    {
        std::uint32_t k0 = static_cast<std::uint32_t>(seed);
        std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
        block_type c{static_cast<std::uint32_t>(block),
                     static_cast<std::uint32_t>(block >> 32),
                     static_cast<std::uint32_t>(stream),
                     static_cast<std::uint32_t>(stream >> 32)};
        for (int round = 0; round < 10; ++round)
        {
            std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
            std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0,
                 static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1,
                 static_cast<std::uint32_t>(p0)};
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return c;
    }
};

//! SplitMix64 finalizer, used to derive child stream identifiers
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

//! Identifier of a child stream labelled by tag
constexpr std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t tag)
{
    return mix64(mix64(parent) ^ mix64(tag + 0x632BE59BD9B4E019ull));
}

//! Map 53 high bits to (0, 1]
constexpr double to_unit_open_closed(std::uint64_t bits)
{
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

//! Two standard normals from two uniforms on (0, 1] (Box-Muller)
inline std::array<double, 2> box_muller(double u1, double u2)
{
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

//! Two uniforms on (0, 1] from one Philox block
inline std::array<double, 2> block_uniforms(Philox4x32::block_type const& b)
{
    std::uint64_t a = (std::uint64_t{b[0]} << 32) | b[1];
    std::uint64_t c = (std::uint64_t{b[2]} << 32) | b[3];
    return {to_unit_open_closed(a), to_unit_open_closed(c)};
}

//! Four standard normals addressed by (seed, stream, index)
inline std::array<double, 4>
keyed_normals4(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    auto u = block_uniforms(Philox4x32::generate(seed, stream, 2 * index));
    auto v = block_uniforms(Philox4x32::generate(seed, stream, 2 * index + 1));
    auto g = box_muller(u[0], u[1]);
    auto h = box_muller(v[0], v[1]);
    return {g[0], g[1], h[0], h[1]};
}

//---------------------------------------------------------------------------//
/*!
 * Sequential random stream.
 *
 * Draws are consumed from consecutive Philox blocks; the counter records the
 * next block. Normals come in Box-Muller pairs and the spare is cached.
 */
class RngStream
{
  public:
    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_{seed}, stream_id_{stream_id}
    {
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t counter() const { return counter_; }

    //! Independent stream labelled by tag, leaving this stream untouched
    RngStream child(std::uint64_t tag) const
    {
        return RngStream{seed_, derive_stream(stream_id_, tag)};
    }

    std::uint64_t next_u64()
    {
        if (used_ == 2)
        {
            buffer_ = Philox4x32::generate(seed_, stream_id_, counter_++);
            used_ = 0;
        }
        std::uint64_t hi = buffer_[2 * used_];
        std::uint64_t lo = buffer_[2 * used_ + 1];
        ++used_;
        return (hi << 32) | lo;
    }

    //! Uniform on (0, 1]
    double uniform() { return to_unit_open_closed(this->next_u64()); }

    double normal()
    {
        if (has_spare_)
        {
            has_spare_ = false;
            return spare_;
        }
        double u1 = this->uniform();
        double u2 = this->uniform();
        auto g = box_muller(u1, u2);
        spare_ = g[1];
        has_spare_ = true;
        return g[0];
    }

    double exponential() { return -std::log(this->uniform()); }

    double angle() { return 2.0 * std::numbers::pi * (1.0 - this->uniform()); }

  private:
    std::uint64_t seed_{0};
    std::uint64_t stream_id_{0};
    std::uint64_t counter_{0};
    Philox4x32::block_type buffer_{};
    int used_{2};
    double spare_{0};
    bool has_spare_{false};
};

//! Exponential(1) draw
inline double draw_exponential(RngStream& stream)
{
    return stream.exponential();
}

}  // namespace bri2d
