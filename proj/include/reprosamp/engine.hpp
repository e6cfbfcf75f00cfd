#pragma once

#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "reprosamp/borel.hpp"
#include "reprosamp/confidence_set.hpp"
#include "reprosamp/rng.hpp"

namespace reprosamp {

using Theta = std::vector<double>;

// Continuous box swept on a regular grid: lower + j * (upper - lower) / divisions.
struct BoxGrid {
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t divisions = 2000;

    static BoxGrid with_step(std::vector<double> lower, std::vector<double> upper, double step);
    std::size_t dim() const { return lower.size(); }
    double step(std::size_t d = 0) const;
    std::vector<double> axis(std::size_t d) const;
};

struct FiniteSet {
    std::vector<Theta> values;
};

// Theta = (discrete part, continuous part); the continuous part is swept on a grid.
struct ProductSpace {
    FiniteSet discrete;
    BoxGrid continuous;
};

// A continuous box without a grid cannot be enumerated.
struct ContinuousBox {
    std::vector<double> lower;
    std::vector<double> upper;
};

using ThetaSpace = std::variant<BoxGrid, FiniteSet, ProductSpace, ContinuousBox>;

std::vector<Theta> enumerate_thetas(const ThetaSpace& space);

struct GenerativeModel {
    ThetaSpace theta_space;
    std::size_t noise_dim = 1;
    std::function<Vector(RngStream&)> sample_noise;
    std::function<Vector(const Theta&, std::span<const double>)> generate;
};

struct NuclearMapping {
    std::size_t dim = 1;
    std::function<Vector(std::span<const double>, const Theta&)> eval;
};

// Returns the nuclear values to test at theta, or nullopt when no u* reproduces y_obs.
using Matcher = std::function<std::optional<std::vector<Vector>>(const Theta&, std::span<const double>)>;

// Replaces the Monte-Carlo Borel region with a known exact one.
using ExactRegion = std::function<BorelRegion(const Theta&, double)>;

struct AlgorithmOptions {
    double alpha = 0.95;
    std::size_t n_mc = 1000;
    IntervalMode mode = IntervalMode::equal_tail;
    ExactRegion exact_region;
};

// Stream used for the Monte-Carlo draws at a given theta.
RngStream theta_stream(const RngStream& rng, const Theta& theta);

std::vector<Vector> simulate_nuclear(const GenerativeModel& model, const NuclearMapping& T, const Theta& theta,
                                     std::size_t n_mc, RngStream stream);

BorelRegion borel_region_for(std::span<const Vector> samples, double alpha, IntervalMode mode);

bool theta_accepted(const GenerativeModel& model, const NuclearMapping& T, std::span<const double> y_obs,
                    const Theta& theta, const AlgorithmOptions& opts, const RngStream& rng, const Matcher& matcher);

ConfidenceSet confidence_set_algorithm1(const GenerativeModel& model, const NuclearMapping& T,
                                        std::span<const double> y_obs, const AlgorithmOptions& opts,
                                        const RngStream& rng, const Matcher& matcher);

struct PValueOptions {
    std::size_t n_mc = 1000;
    IntervalMode mode = IntervalMode::equal_tail;
    ExactRegion exact_region;
};

double repro_pvalue(const GenerativeModel& model, const NuclearMapping& T, std::span<const double> y_obs,
                    const std::vector<Theta>& theta0_set, const std::vector<double>& alpha_grid,
                    const PValueOptions& opts, const RngStream& rng, const Matcher& matcher);

// All u* with generate(theta_tilde, u*) == y; empty when the constraint set is empty.
using Inverter = std::function<std::vector<Vector>(const Theta&, std::span<const double>)>;

struct ProfileValue {
    double value = 1.0;
    bool infeasible = false;
};

Theta join_theta(const Theta& eta, const Vector& beta);

ProfileValue profile_nu(const GenerativeModel& model, const NuclearMapping& T_a, std::span<const double> u,
                        const Theta& eta, const Vector& beta, const Vector& beta_tilde, std::size_t n_mc,
                        const RngStream& rng, const Inverter& inverter);

ProfileValue profile_minimum(const std::vector<Vector>& candidates,
                             const std::function<ProfileValue(const Vector&)>& nu);

using CandidateSearch = std::function<std::vector<Vector>(const Theta& eta)>;

ProfileValue profile_nuclear(const GenerativeModel& model, const NuclearMapping& T_a, std::span<const double> u,
                             const Theta& eta, const Vector& beta, const CandidateSearch& beta_candidates,
                             std::size_t n_mc, const RngStream& rng, const Inverter& inverter);

}  // namespace reprosamp
