#pragma once

#include <span>
#include <vector>

#include "reprosamp/confidence_set.hpp"

namespace reprosamp::neyman {

double irwin_hall_cdf(int n, double x);
double irwin_hall_quantile(int n, double p);

struct UniformLocationSample {
    std::vector<double> values;
    std::size_t n = 0;
    double y_min = 0.0;
    double y_max = 0.0;

    static UniformLocationSample from(std::span<const double> data);
    double mean() const;
};

// (y_max - 1, y_min + 1): the thetas that can reproduce the sample at all.
Interval feasibility_band(const UniformLocationSample& s);

ConfidenceSet uniform_mean_test_ci(const UniformLocationSample& s, double alpha);
ConfidenceSet uniform_mean_repro_ci(const UniformLocationSample& s, double alpha);
ConfidenceSet uniform_lrt_ci(const UniformLocationSample& s, double alpha);
// Repro set from the nuclear mapping max_i |u_i|, i.e. the LRT statistic.
ConfidenceSet uniform_lrt_repro_ci(const UniformLocationSample& s, double alpha);

double orderstat_c_alpha(int n, double alpha);
ConfidenceSet uniform_orderstat_ci(const UniformLocationSample& s, double alpha);

struct BernoulliReport {
    ConfidenceSet closed_form;
    ConfidenceSet literal;
    bool discrepancy = false;
};

BernoulliReport bernoulli_single_obs_ci(int y, double alpha, double grid_step = 0.001);

enum class Inclusion { equal, strict_subset, violation };

const char* to_string(Inclusion v);

Inclusion inclusion_check(const ConfidenceSet& repro, const ConfidenceSet& classical);

}  // namespace reprosamp::neyman
