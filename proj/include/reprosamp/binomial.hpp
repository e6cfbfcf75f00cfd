#pragma once

#include <vector>

#include "reprosamp/confidence_set.hpp"

namespace reprosamp::binomial {

struct BinomialAcceptance {
    int r = 0;
    double theta = 0.0;
    int a_lower = 0;
    int a_upper = 0;
    double mass = 0.0;
};

std::vector<double> binomial_pmf(int r, double theta);

// Shortest window [i, j] with Binomial(r, theta) mass >= alpha.
// Among equally short windows the larger mass wins, then the smaller i.
BinomialAcceptance shortest_binomial_acceptance(int r, double theta, double alpha);

// Acceptance windows for every theta on the grid j / K, j = 1..K-1, K = round(1 / grid_step).
class AcceptanceTable {
public:
    AcceptanceTable(int r, double alpha, double grid_step = 0.0005);

    int r() const { return r_; }
    double alpha() const { return alpha_; }
    double grid_step() const { return 1.0 / static_cast<double>(divisions_); }
    const std::vector<double>& thetas() const { return thetas_; }
    const std::vector<BinomialAcceptance>& windows() const { return windows_; }

    ConfidenceSet repro_set(int y_obs) const;

private:
    int r_;
    double alpha_;
    std::size_t divisions_;
    std::vector<double> thetas_;
    std::vector<BinomialAcceptance> windows_;
};

ConfidenceSet binomial_repro_set(int y_obs, int r, double alpha, double grid_step = 0.0005);

// Closed-form membership a_L(theta) <= y_obs <= a_U(theta) at a single theta.
bool repro_contains(int y_obs, int r, double alpha, double theta);

ConfidenceSet wald_interval(int y_obs, int r, double alpha);

}  // namespace reprosamp::binomial
