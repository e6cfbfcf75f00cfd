#include "reprosamp/rng.hpp"

#include <bit>
#include <cstring>

namespace reprosamp {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id)
{
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(stream_id ^ 0xD1B54A32D192ED03ULL);
    const std::uint64_t c = splitmix64(a ^ b);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    engine_.seed(seq);
}

RngStream RngStream::derive(std::uint64_t child) const
{
    const std::uint64_t id = splitmix64(splitmix64(stream_id_) + 0x632BE59BD9B4E019ULL * (child + 1));
    return RngStream(seed_, id);
}

double RngStream::uniform()
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

double RngStream::normal()
{
    return std::normal_distribution<double>(0.0, 1.0)(engine_);
}

void RngStream::fill_normal(std::span<double> out)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : out) v = dist(engine_);
}

std::vector<double> RngStream::normal_vector(std::size_t n)
{
    std::vector<double> out(n);
    fill_normal(out);
    return out;
}

std::uint64_t hash_doubles(std::span<const double> values)
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (double v : values) {
        if (v == 0.0) v = 0.0;  // fold -0.0
        h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

}  // namespace reprosamp
