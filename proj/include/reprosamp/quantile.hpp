#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "reprosamp/confidence_set.hpp"
#include "reprosamp/rng.hpp"

namespace reprosamp::quantile {

class OrderedSample {
public:
    explicit OrderedSample(std::vector<double> values);

    const std::vector<double>& values() const { return values_; }
    std::size_t n() const { return values_.size(); }
    // 1-based order statistic; k = 0 and k = n + 1 give the -inf / +inf sentinels.
    double order_stat(std::size_t k) const;

private:
    std::vector<double> values_;
};

ConfidenceSet quantile_ci(const OrderedSample& sample, double zeta, double alpha);

double median(std::span<const double> data);

// Smallest value whose cumulative weight reaches half the total; an exact half
// is averaged with the next value so uniform weights give the ordinary median.
double weighted_median(std::span<const double> values, std::span<const double> weights);

double estimate_delta(std::span<const double> data, const std::vector<bool>& overlap_flags);

ConfidenceSet robust_location_ci(std::span<const double> data, double alpha, double delta_hat);

struct MadCalibration {
    std::size_t n = 0;
    double psi_inv_half = 0.0;
    std::size_t a_lower = 0;
    std::size_t a_upper = 0;
    std::size_t n_sim = 0;
    double alpha = 0.0;
    double window_mass = 0.0;
};

std::size_t mad_count(std::span<const double> z, double cut);

MadCalibration calibrate_mad(std::size_t n, double alpha, std::size_t n_sim, const RngStream& rng);

ConfidenceSet robust_scale_ci(std::span<const double> data, double alpha, const MadCalibration& calib);

// Calibrations keyed by n; each n uses its own derived stream, so results do
// not depend on request order.
class MadCalibrationCache {
public:
    MadCalibrationCache(double alpha, std::size_t n_sim, RngStream rng);

    MadCalibration get(std::size_t n);

private:
    double alpha_;
    std::size_t n_sim_;
    RngStream rng_;
    std::mutex mutex_;
    std::map<std::size_t, MadCalibration> cache_;
};

}  // namespace reprosamp::quantile
