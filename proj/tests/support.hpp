#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <catch_amalgamated.hpp>

#include "reprosamp/rng.hpp"

namespace testsupport {

// Small generator for property tests. Each case gets its own stream so a
// failing case can be replayed from the printed case index alone.
class Gen {
public:
    explicit Gen(reprosamp::RngStream rng) : rng_(rng) {}

    double real(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(rng_.uniform() * (hi - lo + 1)) % (hi - lo + 1); }
    double normal() { return rng_.normal(); }
    double level() { return real(0.05, 0.99); }
    bool coin(double p = 0.5) { return rng_.uniform() < p; }

    std::vector<double> reals(std::size_t n, double lo, double hi)
    {
        std::vector<double> v(n);
        for (double& x : v) x = real(lo, hi);
        return v;
    }

    std::vector<double> normals(std::size_t n, double mu = 0.0, double sd = 1.0)
    {
        std::vector<double> v(n);
        for (double& x : v) x = mu + sd * rng_.normal();
        return v;
    }

    // Values drawn from a few atoms so ties are common.
    std::vector<double> tied(std::size_t n, int atoms)
    {
        std::vector<double> v(n);
        for (double& x : v) x = static_cast<double>(integer(0, atoms - 1));
        return v;
    }

    reprosamp::RngStream& stream() { return rng_; }

private:
    reprosamp::RngStream rng_;
};

inline void for_all(std::size_t cases, std::uint64_t seed, const std::function<void(Gen&)>& body)
{
    for (std::size_t c = 0; c < cases; ++c) {
        Gen g(reprosamp::RngStream(seed, 0).derive(c));
        INFO("property case " << c << " (seed " << seed << ")");
        body(g);
    }
}

inline double mc_slack(double alpha, std::size_t reps, double k = 3.0)
{
    return k * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(reps));
}

}  // namespace testsupport
