#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace reprosamp {

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic stream keyed by (seed, stream_id). Child streams are derived
// by mixing, so any task can reconstruct its own stream without shared state.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    RngStream derive(std::uint64_t child) const;

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    double uniform();
    double normal();
    void fill_normal(std::span<double> out);
    std::vector<double> normal_vector(std::size_t n);

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

std::uint64_t hash_doubles(std::span<const double> values);

}  // namespace reprosamp
