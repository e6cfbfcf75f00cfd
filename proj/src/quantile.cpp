#include "reprosamp/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "reprosamp/binomial.hpp"

namespace reprosamp::quantile {

OrderedSample::OrderedSample(std::vector<double> values) : values_(std::move(values))
{
    if (values_.empty()) throw std::invalid_argument("sample must be nonempty");
    std::sort(values_.begin(), values_.end());
}

double OrderedSample::order_stat(std::size_t k) const
{
    if (k == 0) return -kInf;
    if (k > values_.size()) return kInf;
    return values_[k - 1];
}

ConfidenceSet quantile_ci(const OrderedSample& sample, double zeta, double alpha)
{
    if (!(zeta > 0.0 && zeta < 1.0)) throw std::invalid_argument("zeta must lie in (0, 1)");
    const auto acc = binomial::shortest_binomial_acceptance(static_cast<int>(sample.n()), zeta, alpha);
    const double lo = sample.order_stat(static_cast<std::size_t>(acc.a_lower));
    const double hi = sample.order_stat(static_cast<std::size_t>(acc.a_upper) + 1);
    return make_real_set(alpha, RealUnion({Interval{lo, hi, !std::isinf(lo), !std::isinf(hi)}}));
}

double median(std::span<const double> data)
{
    if (data.empty()) throw std::invalid_argument("median of empty data");
    std::vector<double> v(data.begin(), data.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

double weighted_median(std::span<const double> values, std::span<const double> weights)
{
    if (values.empty() || values.size() != weights.size())
        throw std::invalid_argument("weighted median needs matching nonempty inputs");
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double half = 0.5 * total;
    double cum = 0.0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
        cum += weights[idx[r]];
        if (cum >= half * (1.0 - 1e-12)) {
            if (std::abs(cum - half) <= 1e-12 * total && r + 1 < idx.size())
                return 0.5 * (values[idx[r]] + values[idx[r + 1]]);
            return values[idx[r]];
        }
    }
    return values[idx.back()];
}

double estimate_delta(std::span<const double> data, const std::vector<bool>& overlap_flags)
{
    if (data.size() != overlap_flags.size()) throw std::invalid_argument("flag count does not match data");
    std::vector<double> w(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) w[i] = overlap_flags[i] ? 1.5 : 1.0;
    return median(data) - weighted_median(data, w);
}

ConfidenceSet robust_location_ci(std::span<const double> data, double alpha, double delta_hat)
{
    auto set = quantile_ci(OrderedSample(std::vector<double>(data.begin(), data.end())), 0.5, alpha);
    std::vector<Interval> shifted = set.real_union().intervals();
    for (Interval& i : shifted) {
        i.lo -= delta_hat;
        i.hi -= delta_hat;
    }
    set.content = RealUnion(std::move(shifted));
    return set;
}

std::size_t mad_count(std::span<const double> z, double cut)
{
    const double m = median(z);
    return static_cast<std::size_t>(
        std::count_if(z.begin(), z.end(), [&](double v) { return std::abs(v - m) <= cut; }));
}

MadCalibration calibrate_mad(std::size_t n, double alpha, std::size_t n_sim, const RngStream& rng)
{
    if (n < 2) throw std::invalid_argument("calibration needs n >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("invalid level");
    if (n_sim < 1000 || static_cast<double>(n_sim) * (1.0 - alpha) < 1.0)
        throw std::invalid_argument("insufficient simulation");

    std::vector<double> deviations(n * n_sim);
    std::vector<double> z(n);
    for (std::size_t s = 0; s < n_sim; ++s) {
        RngStream stream = rng.derive(s);
        stream.fill_normal(z);
        const double m = median(z);
        for (std::size_t j = 0; j < n; ++j) deviations[s * n + j] = std::abs(z[j] - m);
    }

    std::vector<double> pooled = deviations;
    const double psi = median(pooled);
    if (!(psi > 0.0)) throw std::runtime_error("calibration produced a zero scale constant");

    std::vector<std::size_t> hist(n + 1, 0);
    for (std::size_t s = 0; s < n_sim; ++s) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < n; ++j) c += deviations[s * n + j] <= psi ? 1 : 0;
        ++hist[c];
    }

    const std::size_t need = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n_sim) - 1e-9));
    std::vector<std::size_t> cum(n + 2, 0);
    for (std::size_t c = 0; c <= n; ++c) cum[c + 1] = cum[c] + hist[c];

    MadCalibration out{n, psi, 0, n, n_sim, alpha, 1.0};
    for (std::size_t w = 0; w <= n; ++w) {
        bool found = false;
        std::size_t best_mass = 0;
        for (std::size_t l = 0; l + w <= n; ++l) {
            const std::size_t mass = cum[l + w + 1] - cum[l];
            if (mass >= need && (!found || mass > best_mass)) {
                found = true;
                best_mass = mass;
                out.a_lower = l;
                out.a_upper = l + w;
            }
        }
        if (found) {
            out.window_mass = static_cast<double>(best_mass) / static_cast<double>(n_sim);
            break;
        }
    }
    return out;
}

ConfidenceSet robust_scale_ci(std::span<const double> data, double alpha, const MadCalibration& calib)
{
    if (calib.n != data.size()) throw std::invalid_argument("calibration size does not match data");
    const double m = median(data);
    std::vector<double> d(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) d[i] = std::abs(data[i] - m);
    std::sort(d.begin(), d.end());

    // count(sigma) = #{d_i <= psi sigma}; count >= aL iff sigma >= d_(aL)/psi, count <= aU iff sigma < d_(aU+1)/psi
    const double psi = calib.psi_inv_half;
    const double lo = calib.a_lower == 0 ? 0.0 : d[calib.a_lower - 1] / psi;
    const double hi = calib.a_upper >= d.size() ? kInf : d[calib.a_upper] / psi;
    auto set = make_real_set(alpha, RealUnion({Interval{lo, hi, true, false}}));
    set.meta.n_mc = calib.n_sim;
    return set;
}

MadCalibrationCache::MadCalibrationCache(double alpha, std::size_t n_sim, RngStream rng)
    : alpha_(alpha), n_sim_(n_sim), rng_(rng)
{
}

MadCalibration MadCalibrationCache::get(std::size_t n)
{
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (auto it = cache_.find(n); it != cache_.end()) return it->second;
    }
    MadCalibration calib = calibrate_mad(n, alpha_, n_sim_, rng_.derive(n));
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.emplace(n, calib).first->second;
}

}  // namespace reprosamp::quantile
