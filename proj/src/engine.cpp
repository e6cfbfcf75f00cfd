#include "reprosamp/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reprosamp {

BoxGrid BoxGrid::with_step(std::vector<double> lower, std::vector<double> upper, double step)
{
    if (lower.empty() || lower.size() != upper.size()) throw std::invalid_argument("grid bounds mismatch");
    if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
    const double range = upper[0] - lower[0];
    if (!(range >= 0.0)) throw std::invalid_argument("grid upper bound below lower bound");
    const auto div = static_cast<std::size_t>(std::llround(range / step));
    return BoxGrid{std::move(lower), std::move(upper), std::max<std::size_t>(div, 1)};
}

double BoxGrid::step(std::size_t d) const
{
    return (upper.at(d) - lower.at(d)) / static_cast<double>(divisions);
}

std::vector<double> BoxGrid::axis(std::size_t d) const
{
    const double lo = lower.at(d);
    const double range = upper.at(d) - lo;
    std::vector<double> out(divisions + 1);
    for (std::size_t j = 0; j <= divisions; ++j)
        out[j] = lo + (static_cast<double>(j) * range) / static_cast<double>(divisions);
    return out;
}

namespace {

std::vector<Theta> grid_points(const BoxGrid& g)
{
    std::vector<Theta> out{Theta{}};
    for (std::size_t d = 0; d < g.dim(); ++d) {
        const auto ax = g.axis(d);
        std::vector<Theta> next;
        next.reserve(out.size() * ax.size());
        for (const Theta& prefix : out)
            for (double x : ax) {
                Theta t = prefix;
                t.push_back(x);
                next.push_back(std::move(t));
            }
        out = std::move(next);
    }
    return out;
}

RealUnion runs_to_union(const std::vector<double>& axis, const std::vector<char>& keep)
{
    std::vector<Interval> parts;
    std::size_t j = 0;
    while (j < axis.size()) {
        if (!keep[j]) {
            ++j;
            continue;
        }
        std::size_t k = j;
        while (k + 1 < axis.size() && keep[k + 1]) ++k;
        parts.push_back(Interval::closed(axis[j], axis[k]));
        j = k + 1;
    }
    return RealUnion(std::move(parts));
}

}  // namespace

std::vector<Theta> enumerate_thetas(const ThetaSpace& space)
{
    if (const auto* g = std::get_if<BoxGrid>(&space)) return grid_points(*g);
    if (const auto* f = std::get_if<FiniteSet>(&space)) return f->values;
    if (const auto* p = std::get_if<ProductSpace>(&space)) {
        std::vector<Theta> out;
        const auto cont = grid_points(p->continuous);
        for (const Theta& d : p->discrete.values)
            for (const Theta& c : cont) out.push_back(join_theta(d, c));
        return out;
    }
    throw std::invalid_argument("grid required");
}

RngStream theta_stream(const RngStream& rng, const Theta& theta)
{
    return rng.derive(hash_doubles(theta));
}

std::vector<Vector> simulate_nuclear(const GenerativeModel& model, const NuclearMapping& T, const Theta& theta,
                                     std::size_t n_mc, RngStream stream)
{
    std::vector<Vector> out;
    out.reserve(n_mc);
    for (std::size_t s = 0; s < n_mc; ++s) {
        const Vector u = model.sample_noise(stream);
        Vector t = T.eval(u, theta);
        if (t.size() != T.dim) throw std::logic_error("nuclear mapping returned wrong dimension");
        out.push_back(std::move(t));
    }
    return out;
}

BorelRegion borel_region_for(std::span<const Vector> samples, double alpha, IntervalMode mode)
{
    if (samples.empty()) throw std::invalid_argument("no samples");
    if (samples.front().size() == 1) {
        std::vector<double> flat;
        flat.reserve(samples.size());
        for (const Vector& s : samples) flat.push_back(s[0]);
        return borel_interval_from_samples(flat, alpha, mode);
    }
    return depth_central_region(samples, alpha);
}

namespace {

bool any_inside(const BorelRegion& region, const std::vector<Vector>& values)
{
    return std::any_of(values.begin(), values.end(), [&](const Vector& v) { return contains(region, v); });
}

}  // namespace

bool theta_accepted(const GenerativeModel& model, const NuclearMapping& T, std::span<const double> y_obs,
                    const Theta& theta, const AlgorithmOptions& opts, const RngStream& rng, const Matcher& matcher)
{
    const auto matched = matcher(theta, y_obs);
    if (!matched || matched->empty()) return false;
    if (opts.exact_region) return any_inside(opts.exact_region(theta, opts.alpha), *matched);
    const auto samples = simulate_nuclear(model, T, theta, opts.n_mc, theta_stream(rng, theta));
    return any_inside(borel_region_for(samples, opts.alpha, opts.mode), *matched);
}

ConfidenceSet confidence_set_algorithm1(const GenerativeModel& model, const NuclearMapping& T,
                                        std::span<const double> y_obs, const AlgorithmOptions& opts,
                                        const RngStream& rng, const Matcher& matcher)
{
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw std::invalid_argument("invalid level");
    const std::vector<Theta> thetas = enumerate_thetas(model.theta_space);

    std::vector<char> keep(thetas.size(), 0);
    for (std::size_t i = 0; i < thetas.size(); ++i)
        keep[i] = theta_accepted(model, T, y_obs, thetas[i], opts, rng, matcher) ? 1 : 0;

    ConfidenceSet set;
    set.level = opts.alpha;
    set.meta.seed = rng.seed();
    set.meta.n_mc = opts.exact_region ? 0 : opts.n_mc;

    if (const auto* g = std::get_if<BoxGrid>(&model.theta_space); g != nullptr && g->dim() == 1) {
        set.content = runs_to_union(g->axis(0), keep);
        set.meta.grid_step = g->step();
    } else if (const auto* p = std::get_if<ProductSpace>(&model.theta_space);
               p != nullptr && p->continuous.dim() == 1) {
        const auto axis = p->continuous.axis(0);
        ProductSet prod;
        for (std::size_t d = 0; d < p->discrete.values.size(); ++d) {
            std::vector<char> sub(keep.begin() + static_cast<std::ptrdiff_t>(d * axis.size()),
                                  keep.begin() + static_cast<std::ptrdiff_t>((d + 1) * axis.size()));
            RealUnion u = runs_to_union(axis, sub);
            if (!u.empty()) prod.entries.emplace_back(p->discrete.values[d], std::move(u));
        }
        set.content = std::move(prod);
        set.meta.grid_step = p->continuous.step();
    } else {
        std::vector<ParamValue> vals;
        for (std::size_t i = 0; i < thetas.size(); ++i)
            if (keep[i]) vals.push_back(thetas[i]);
        set.content = DiscreteSet(std::move(vals));
        if (const auto* g2 = std::get_if<BoxGrid>(&model.theta_space)) set.meta.grid_step = g2->step();
    }
    if (std::none_of(keep.begin(), keep.end(), [](char k) { return k != 0; }))
        set.warn("empty confidence set");
    return set;
}

double repro_pvalue(const GenerativeModel& model, const NuclearMapping& T, std::span<const double> y_obs,
                    const std::vector<Theta>& theta0_set, const std::vector<double>& alpha_grid,
                    const PValueOptions& opts, const RngStream& rng, const Matcher& matcher)
{
    if (theta0_set.empty()) throw std::invalid_argument("empty theta0 set");
    if (alpha_grid.empty() || !std::is_sorted(alpha_grid.begin(), alpha_grid.end()))
        throw std::invalid_argument("alpha grid must be sorted ascending and nonempty");
    for (double a : alpha_grid)
        if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("invalid level");

    double inf_alpha = 1.0;
    for (const Theta& theta : theta0_set) {
        const auto matched = matcher(theta, y_obs);
        if (!matched || matched->empty()) continue;
        std::vector<Vector> samples;
        if (!opts.exact_region) samples = simulate_nuclear(model, T, theta, opts.n_mc, theta_stream(rng, theta));
        for (double a : alpha_grid) {
            if (a >= inf_alpha) break;
            const BorelRegion region =
                opts.exact_region ? opts.exact_region(theta, a) : borel_region_for(samples, a, opts.mode);
            if (any_inside(region, *matched)) {
                inf_alpha = a;
                break;
            }
        }
    }
    return 1.0 - inf_alpha;
}

Theta join_theta(const Theta& eta, const Vector& beta)
{
    Theta out = eta;
    out.insert(out.end(), beta.begin(), beta.end());
    return out;
}

ProfileValue profile_nu(const GenerativeModel& model, const NuclearMapping& T_a, std::span<const double> u,
                        const Theta& eta, const Vector& beta, const Vector& beta_tilde, std::size_t n_mc,
                        const RngStream& rng, const Inverter& inverter)
{
    if (n_mc == 0) throw std::invalid_argument("n_mc must be positive");
    const Vector y = model.generate(join_theta(eta, beta), u);
    const Theta theta_tilde = join_theta(eta, beta_tilde);
    const std::vector<Vector> ustars = inverter(theta_tilde, y);
    if (ustars.empty()) return {1.0, true};

    // common random numbers across theta-tilde candidates
    const auto samples = simulate_nuclear(model, T_a, theta_tilde, n_mc, rng);
    const MahalanobisDepth depth(samples);
    std::vector<double> ref;
    ref.reserve(samples.size());
    for (const Vector& s : samples) ref.push_back(depth(s));
    std::sort(ref.begin(), ref.end());

    double best = 1.0;
    for (const Vector& us : ustars) {
        const double d = depth(T_a.eval(us, theta_tilde));
        const auto below = std::upper_bound(ref.begin(), ref.end(), d) - ref.begin();
        const double cdf = static_cast<double>(below) / static_cast<double>(ref.size());
        best = std::min(best, 1.0 - cdf);
    }
    return {best, false};
}

ProfileValue profile_minimum(const std::vector<Vector>& candidates,
                             const std::function<ProfileValue(const Vector&)>& nu)
{
    if (candidates.empty()) throw std::invalid_argument("no candidates");
    ProfileValue best{1.0, true};
    for (const Vector& c : candidates) {
        const ProfileValue v = nu(c);
        if (!v.infeasible) best.infeasible = false;
        best.value = std::min(best.value, v.value);
    }
    return best;
}

ProfileValue profile_nuclear(const GenerativeModel& model, const NuclearMapping& T_a, std::span<const double> u,
                             const Theta& eta, const Vector& beta, const CandidateSearch& beta_candidates,
                             std::size_t n_mc, const RngStream& rng, const Inverter& inverter)
{
    return profile_minimum(beta_candidates(eta), [&](const Vector& bt) {
        return profile_nu(model, T_a, u, eta, beta, bt, n_mc, rng, inverter);
    });
}

}  // namespace reprosamp
