#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "reprosamp/confidence_set.hpp"
#include "reprosamp/quantile.hpp"
#include "reprosamp/rng.hpp"

namespace reprosamp::mixture {

using Vector = std::vector<double>;

// Hard assignment of n points to tau components, labels 0..tau-1.
class MembershipMatrix {
public:
    MembershipMatrix() = default;
    MembershipMatrix(std::size_t tau, std::vector<std::size_t> labels);

    std::size_t n() const { return labels_.size(); }
    std::size_t tau() const { return tau_; }
    std::size_t label(std::size_t i) const { return labels_[i]; }
    const std::vector<std::size_t>& labels() const { return labels_; }
    std::vector<std::size_t> counts() const;
    std::vector<std::vector<std::size_t>> groups() const;

    bool operator==(const MembershipMatrix&) const = default;
    bool operator<(const MembershipMatrix& o) const;

private:
    std::size_t tau_ = 0;
    std::vector<std::size_t> labels_;
};

// Relabels components by ascending mean of y (ties: smallest first member).
MembershipMatrix canonical_membership(const MembershipMatrix& m, std::span<const double> y);

MembershipMatrix permute_labels(const MembershipMatrix& m, const std::vector<std::size_t>& perm);

struct MixtureParams {
    std::size_t tau = 0;
    MembershipMatrix membership;
    Vector mu;
    Vector sigma;
};

// Merges components with identical (mu, sigma), then orders by mu ascending.
MixtureParams canonicalize(const MixtureParams& p);

Vector generate_mixture(const MixtureParams& params, std::span<const double> u);

std::vector<std::size_t> draw_labels(std::span<const double> weights, std::size_t n, RngStream& rng);

struct SufficientStats {
    Vector a;
    Vector b;
};

SufficientStats component_stats(std::span<const double> y, const MembershipMatrix& m);

double bic_criterion(std::span<const double> y, const MembershipMatrix& m);

struct FitOptions {
    std::size_t fit_budget = 5;
    std::size_t max_iter = 200;
    double tol = 1e-8;
};

struct GaussFit {
    MembershipMatrix membership;
    double criterion = 0.0;
};

// Classification EM for a tau-component Gaussian partition of y, best over fit_budget restarts.
GaussFit fit_gaussian_partition(std::span<const double> y, std::size_t tau, const FitOptions& opts, RngStream& rng);

std::size_t bic_tau_hat(std::span<const double> y, std::size_t tau_max, std::size_t fit_budget, const RngStream& rng);

class DegenerateDirection : public std::runtime_error {
public:
    DegenerateDirection() : std::runtime_error("degenerate direction") {}
};

Vector conditional_repro_sample(const SufficientStats& stats, const MembershipMatrix& m,
                                std::span<const double> u_prime);

struct NuclearDetail {
    double statistic = 0.0;
    std::size_t tau_hat_obs = 0;
    std::map<std::size_t, std::size_t> counts;
    std::size_t n_mc = 0;
};

// Sum of the estimated probabilities of every tau-bar strictly more likely than tau-hat(y_obs).
double statistic_from_counts(const std::map<std::size_t, std::size_t>& counts, std::size_t tau_hat_obs,
                             std::size_t n_mc);

NuclearDetail nuclear_statistic_detail(std::span<const double> y_obs, std::size_t tau, const MembershipMatrix& m,
                                       std::size_t n_mc, std::size_t tau_max, const RngStream& rng,
                                       std::size_t fit_budget = 5,
                                       std::optional<std::size_t> tau_hat_obs = std::nullopt);

double nuclear_statistic(std::span<const double> y_obs, std::size_t tau, const MembershipMatrix& m,
                         std::size_t n_mc, std::size_t tau_max, const RngStream& rng, std::size_t fit_budget = 5);

struct RegressionFit {
    MembershipMatrix membership;
    Vector intercept;
    Vector slope;
    double rss = 0.0;
};

// Hard-assignment mixture of regressions y ~ intercept_k + slope_k u, slope_k >= 0.
RegressionFit fit_regression_mixture(std::span<const double> y, std::span<const double> u, std::size_t tau,
                                     const FitOptions& opts, RngStream& rng);

double modified_bic(double rss, std::size_t n, std::size_t tau, double lambda);

struct CandidateEntry {
    std::size_t tau = 0;
    MembershipMatrix membership;
    std::size_t multiplicity = 0;
};

struct CandidateSet {
    std::vector<CandidateEntry> entries;
    std::vector<std::string> warnings;

    std::vector<std::size_t> taus() const;
    bool contains_tau(std::size_t tau) const;
};

CandidateSet candidate_set(std::span<const double> y_obs, std::size_t n_candidates, double lambda,
                           std::size_t tau_max, std::size_t fit_budget, const RngStream& rng);

struct TauSetOptions {
    std::size_t fit_budget = 5;
    bool short_circuit = true;
};

struct TauSetResult {
    ConfidenceSet set;
    std::map<std::size_t, double> min_statistic;
    std::size_t tau_hat_obs = 0;
};

TauSetResult tau_confidence_detail(std::span<const double> y_obs, const CandidateSet& cands, double alpha,
                                   std::size_t n_mc, std::size_t tau_max, const RngStream& rng,
                                   const TauSetOptions& opts = {});

ConfidenceSet tau_confidence_set(std::span<const double> y_obs, const CandidateSet& cands, double alpha,
                                 std::size_t n_mc, std::size_t tau_max, const RngStream& rng,
                                 std::size_t fit_budget = 5);

std::vector<bool> span_overlap_flags(std::span<const double> y, const MembershipMatrix& m);

struct MuSigmaSets {
    // index k: component k (0-based, ordered by mean) as a product set over tau*
    std::vector<ConfidenceSet> mu;
    std::vector<ConfidenceSet> sigma;
};

MuSigmaSets mu_sigma_confidence_sets(std::span<const double> y_obs, const CandidateSet& cands, double alpha,
                                     quantile::MadCalibrationCache& calib);

}  // namespace reprosamp::mixture
