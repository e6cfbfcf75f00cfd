#include "reprosamp/binomial.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace reprosamp::binomial {

namespace {

void check_args(int r, double alpha)
{
    if (r < 1) throw std::invalid_argument("r must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("invalid level");
}

void check_y(int y_obs, int r)
{
    if (y_obs < 0 || y_obs > r) throw std::invalid_argument("y_obs must lie in [0, r]");
}

}  // namespace

std::vector<double> binomial_pmf(int r, double theta)
{
    if (r < 0) throw std::invalid_argument("r must be non-negative");
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0, 1)");
    std::vector<double> pmf(static_cast<std::size_t>(r) + 1);
    const double lt = std::log(theta);
    const double l1t = std::log1p(-theta);
    const double lr = std::lgamma(r + 1.0);
    for (int k = 0; k <= r; ++k)
        pmf[k] = std::exp(lr - std::lgamma(k + 1.0) - std::lgamma(r - k + 1.0) + k * lt + (r - k) * l1t);
    return pmf;
}

BinomialAcceptance shortest_binomial_acceptance(int r, double theta, double alpha)
{
    check_args(r, alpha);
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0, 1)");
    const auto pmf = binomial_pmf(r, theta);
    std::vector<long double> cum(pmf.size() + 1, 0.0L);
    for (std::size_t k = 0; k < pmf.size(); ++k) cum[k + 1] = cum[k] + pmf[k];

    const long double need = static_cast<long double>(alpha) - 1e-12L;
    for (int w = 0; w <= r; ++w) {
        int best_i = -1;
        long double best_mass = 0.0L;
        for (int i = 0; i + w <= r; ++i) {
            const long double mass = cum[i + w + 1] - cum[i];
            if (mass < need) continue;
            if (best_i < 0 || mass > best_mass * (1.0L + 1e-12L)) {
                best_i = i;
                best_mass = mass;
            }
        }
        if (best_i >= 0)
            return {r, theta, best_i, best_i + w, static_cast<double>(std::min(best_mass, 1.0L))};
    }
    return {r, theta, 0, r, 1.0};
}

AcceptanceTable::AcceptanceTable(int r, double alpha, double grid_step) : r_(r), alpha_(alpha)
{
    check_args(r, alpha);
    if (!(grid_step > 0.0 && grid_step < 0.5)) throw std::invalid_argument("grid step must lie in (0, 0.5)");
    divisions_ = static_cast<std::size_t>(std::llround(1.0 / grid_step));
    thetas_.reserve(divisions_ - 1);
    windows_.reserve(divisions_ - 1);
    for (std::size_t j = 1; j < divisions_; ++j) {
        const double theta = static_cast<double>(j) / static_cast<double>(divisions_);
        thetas_.push_back(theta);
        windows_.push_back(shortest_binomial_acceptance(r, theta, alpha));
    }
}

ConfidenceSet AcceptanceTable::repro_set(int y_obs) const
{
    check_y(y_obs, r_);
    std::vector<Interval> parts;
    std::size_t j = 0;
    const std::size_t m = thetas_.size();
    auto inside = [&](std::size_t k) { return windows_[k].a_lower <= y_obs && y_obs <= windows_[k].a_upper; };
    while (j < m) {
        if (!inside(j)) {
            ++j;
            continue;
        }
        std::size_t k = j;
        while (k + 1 < m && inside(k + 1)) ++k;
        parts.push_back(Interval::closed(thetas_[j], thetas_[k]));
        j = k + 1;
    }
    SetMeta meta;
    meta.grid_step = grid_step();
    return make_real_set(alpha_, RealUnion(std::move(parts)), std::move(meta));
}

ConfidenceSet binomial_repro_set(int y_obs, int r, double alpha, double grid_step)
{
    check_y(y_obs, r);
    return AcceptanceTable(r, alpha, grid_step).repro_set(y_obs);
}

bool repro_contains(int y_obs, int r, double alpha, double theta)
{
    check_y(y_obs, r);
    const auto acc = shortest_binomial_acceptance(r, theta, alpha);
    return acc.a_lower <= y_obs && y_obs <= acc.a_upper;
}

ConfidenceSet wald_interval(int y_obs, int r, double alpha)
{
    check_args(r, alpha);
    check_y(y_obs, r);
    const double z = boost::math::quantile(boost::math::normal(), 0.5 + alpha / 2.0);
    const double p = static_cast<double>(y_obs) / r;
    const double half = z * std::sqrt(p * (1.0 - p) / r);
    auto set = make_real_set(alpha, RealUnion({Interval::closed(std::max(0.0, p - half), std::min(1.0, p + half))}));
    if (half == 0.0) set.warn("degenerate Wald interval (p-hat at boundary)");
    return set;
}

}  // namespace reprosamp::binomial
