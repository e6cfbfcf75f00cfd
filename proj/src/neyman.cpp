#include "reprosamp/neyman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace reprosamp::neyman {

namespace {

using Big = boost::multiprecision::cpp_bin_float_50;

void check_level(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("invalid level");
}

Big irwin_hall_cdf_exact(int n, double x)
{
    Big sum = 0;
    Big binom = 1;
    const int kmax = static_cast<int>(std::floor(x));
    for (int k = 0; k <= std::min(kmax, n); ++k) {
        Big term = binom * pow(Big(x) - k, n);
        sum += (k % 2 == 0) ? term : Big(-term);
        binom = binom * (n - k) / (k + 1);
    }
    Big fact = 1;
    for (int i = 2; i <= n; ++i) fact *= i;
    return sum / fact;
}

}  // namespace

double irwin_hall_cdf(int n, double x)
{
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    if (x <= 0.0) return 0.0;
    if (x >= n) return 1.0;
    if (n > 50) {
        const double sd = std::sqrt(n / 12.0);
        return boost::math::cdf(boost::math::normal(n / 2.0, sd), x);
    }
    const double half = n / 2.0;
    if (x <= half) return irwin_hall_cdf_exact(n, x).convert_to<double>();
    return (Big(1) - irwin_hall_cdf_exact(n, n - x)).convert_to<double>();
}

double irwin_hall_quantile(int n, double p)
{
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0, 1)");
    double lo = 0.0;
    double hi = n;
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (irwin_hall_cdf(n, mid) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

UniformLocationSample UniformLocationSample::from(std::span<const double> data)
{
    if (data.empty()) throw std::invalid_argument("sample must be nonempty");
    UniformLocationSample s;
    s.values.assign(data.begin(), data.end());
    s.n = s.values.size();
    const auto [mn, mx] = std::minmax_element(s.values.begin(), s.values.end());
    s.y_min = *mn;
    s.y_max = *mx;
    return s;
}

double UniformLocationSample::mean() const
{
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
}

Interval feasibility_band(const UniformLocationSample& s)
{
    return Interval::open(s.y_max - 1.0, s.y_min + 1.0);
}

namespace {

Interval intersect(const Interval& a, const Interval& b)
{
    Interval out;
    if (a.lo > b.lo || (a.lo == b.lo && !a.lo_closed)) {
        out.lo = a.lo;
        out.lo_closed = a.lo_closed;
    } else {
        out.lo = b.lo;
        out.lo_closed = b.lo_closed;
    }
    if (a.hi < b.hi || (a.hi == b.hi && !a.hi_closed)) {
        out.hi = a.hi;
        out.hi_closed = a.hi_closed;
    } else {
        out.hi = b.hi;
        out.hi_closed = b.hi_closed;
    }
    return out;
}

ConfidenceSet single(double alpha, const Interval& i)
{
    return make_real_set(alpha, RealUnion({i}));
}

}  // namespace

ConfidenceSet uniform_mean_test_ci(const UniformLocationSample& s, double alpha)
{
    check_level(alpha);
    const int n = static_cast<int>(s.n);
    const double q = irwin_hall_quantile(n, 0.5 + alpha / 2.0);
    const double half = 2.0 * q / n - 1.0;
    const double ybar = s.mean();
    return single(alpha, Interval::open(ybar - half, ybar + half));
}

ConfidenceSet uniform_mean_repro_ci(const UniformLocationSample& s, double alpha)
{
    const ConfidenceSet test = uniform_mean_test_ci(s, alpha);
    return single(alpha, intersect(test.real_union().intervals().front(), feasibility_band(s)));
}

ConfidenceSet uniform_lrt_ci(const UniformLocationSample& s, double alpha)
{
    check_level(alpha);
    const double e = std::pow(alpha, 1.0 / static_cast<double>(s.n));
    return single(alpha, Interval::open(s.y_max - e, s.y_min + e));
}

ConfidenceSet uniform_lrt_repro_ci(const UniformLocationSample& s, double alpha)
{
    const ConfidenceSet lrt = uniform_lrt_ci(s, alpha);
    if (lrt.empty()) return lrt;
    return single(alpha, intersect(lrt.real_union().intervals().front(), feasibility_band(s)));
}

double orderstat_c_alpha(int n, double alpha)
{
    check_level(alpha);
    if (n < 2) throw std::invalid_argument("n must be at least 2");
    // (c+1)^n - 2^{n-1} c^n = 2^{n-1}(1-alpha), divided through by 2^{n-1}; increasing in c on (0,1)
    auto g = [n, alpha](double c) { return 2.0 * std::pow(0.5 * (1.0 + c), n) - std::pow(c, n) - (1.0 - alpha); };
    if (!(g(0.0) < 0.0)) throw std::domain_error("level infeasible for n");
    double lo = 0.0;
    double hi = 1.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

ConfidenceSet uniform_orderstat_ci(const UniformLocationSample& s, double alpha)
{
    const double c = orderstat_c_alpha(static_cast<int>(s.n), alpha);
    const double lo = std::max(s.y_min + c, s.y_max - 1.0);
    const double hi = std::min(s.y_max - c, s.y_min + 1.0);
    return single(alpha, Interval::open(lo, hi));
}

namespace {

Interval bernoulli_region(double theta, double alpha)
{
    if (theta > 0.5) return Interval::closed(1.0 - alpha, 1.0);
    if (theta == 0.5) return Interval::closed((1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0);
    return Interval::closed(0.0, alpha);
}

// exists u in (0,1) with I(u < theta) = y and u in B_alpha(theta)
bool bernoulli_feasible(int y, double theta, double alpha)
{
    const Interval b = bernoulli_region(theta, alpha);
    if (y == 1) {
        const double lo = std::max(0.0, b.lo);
        const double hi = std::min(theta, b.hi);
        return lo < hi;
    }
    const double lo = std::max(theta, b.lo);
    const double hi = std::min(1.0, b.hi);
    return lo < hi || (lo == hi && lo < 1.0);
}

}  // namespace

BernoulliReport bernoulli_single_obs_ci(int y, double alpha, double grid_step)
{
    check_level(alpha);
    if (y != 0 && y != 1) throw std::invalid_argument("y must be 0 or 1");
    if (!(grid_step > 0.0 && grid_step < 0.5)) throw std::invalid_argument("grid step must lie in (0, 0.5)");

    BernoulliReport report;
    report.closed_form =
        single(alpha, y == 1 ? Interval::closed(1.0 - alpha, 1.0) : Interval::closed(0.0, alpha));

    const auto k = static_cast<std::size_t>(std::llround(1.0 / grid_step));
    std::vector<Interval> parts;
    bool differs = false;
    std::size_t j = 0;
    while (j <= k) {
        const double theta = static_cast<double>(j) / static_cast<double>(k);
        const bool in = bernoulli_feasible(y, theta, alpha);
        if (in != report.closed_form.real_union().contains(theta)) differs = true;
        if (!in) {
            ++j;
            continue;
        }
        std::size_t e = j;
        while (e + 1 <= k) {
            const double t2 = static_cast<double>(e + 1) / static_cast<double>(k);
            const bool in2 = bernoulli_feasible(y, t2, alpha);
            if (in2 != report.closed_form.real_union().contains(t2)) differs = true;
            if (!in2) break;
            ++e;
        }
        parts.push_back(Interval::closed(theta, static_cast<double>(e) / static_cast<double>(k)));
        j = e + 1;
    }
    SetMeta meta;
    meta.grid_step = 1.0 / static_cast<double>(k);
    report.literal = make_real_set(alpha, RealUnion(std::move(parts)), meta);
    report.discrepancy = differs;
    if (differs) {
        report.closed_form.warn("literal set evaluation differs from the displayed closed form");
        report.literal.warn("literal set evaluation differs from the displayed closed form");
    }
    return report;
}

const char* to_string(Inclusion v)
{
    switch (v) {
    case Inclusion::equal: return "equal";
    case Inclusion::strict_subset: return "strict_subset";
    default: return "violation";
    }
}

namespace {

bool interval_within(const Interval& a, const Interval& b)
{
    if (a.empty()) return true;
    if (b.empty()) return false;
    const bool lo_ok = b.lo < a.lo || (b.lo == a.lo && (b.lo_closed || !a.lo_closed));
    const bool hi_ok = a.hi < b.hi || (a.hi == b.hi && (b.hi_closed || !a.hi_closed));
    return lo_ok && hi_ok;
}

bool union_within(const RealUnion& a, const RealUnion& b)
{
    return std::all_of(a.intervals().begin(), a.intervals().end(), [&](const Interval& ia) {
        return std::any_of(b.intervals().begin(), b.intervals().end(),
                           [&](const Interval& ib) { return interval_within(ia, ib); });
    });
}

bool discrete_within(const DiscreteSet& a, const DiscreteSet& b)
{
    return std::all_of(a.values().begin(), a.values().end(), [&](const ParamValue& v) { return b.contains(v); });
}

}  // namespace

Inclusion inclusion_check(const ConfidenceSet& repro, const ConfidenceSet& classical)
{
    if (repro.content.index() != classical.content.index())
        throw std::invalid_argument("inclusion check needs matching set kinds");
    bool sub = false;
    bool sup = false;
    if (const auto* a = std::get_if<RealUnion>(&repro.content)) {
        const auto& b = classical.real_union();
        sub = union_within(*a, b);
        sup = union_within(b, *a);
    } else if (const auto* d = std::get_if<DiscreteSet>(&repro.content)) {
        const auto& b = classical.discrete();
        sub = discrete_within(*d, b);
        sup = discrete_within(b, *d);
    } else {
        throw std::invalid_argument("inclusion check is defined for real unions and discrete sets");
    }
    if (!sub) return Inclusion::violation;
    return sup ? Inclusion::equal : Inclusion::strict_subset;
}

}  // namespace reprosamp::neyman
