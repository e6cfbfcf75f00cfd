#include "reprosamp/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

namespace reprosamp::mixture {

namespace {

constexpr double kHuge = std::numeric_limits<double>::infinity();

std::vector<std::size_t> label_counts(const std::vector<std::size_t>& labels, std::size_t tau)
{
    std::vector<std::size_t> c(tau, 0);
    for (std::size_t l : labels) ++c[l];
    return c;
}

}  // namespace

MembershipMatrix::MembershipMatrix(std::size_t tau, std::vector<std::size_t> labels)
    : tau_(tau), labels_(std::move(labels))
{
    if (tau_ == 0) throw std::invalid_argument("tau must be at least 1");
    for (std::size_t l : labels_)
        if (l >= tau_) throw std::invalid_argument("component label out of range");
    for (std::size_t c : label_counts(labels_, tau_))
        if (c < 2) throw std::invalid_argument("undersized component");
}

std::vector<std::size_t> MembershipMatrix::counts() const
{
    return label_counts(labels_, tau_);
}

std::vector<std::vector<std::size_t>> MembershipMatrix::groups() const
{
    std::vector<std::vector<std::size_t>> g(tau_);
    for (std::size_t i = 0; i < labels_.size(); ++i) g[labels_[i]].push_back(i);
    return g;
}

bool MembershipMatrix::operator<(const MembershipMatrix& o) const
{
    if (tau_ != o.tau_) return tau_ < o.tau_;
    return labels_ < o.labels_;
}

MembershipMatrix canonical_membership(const MembershipMatrix& m, std::span<const double> y)
{
    if (y.size() != m.n()) throw std::invalid_argument("membership size does not match data");
    const auto groups = m.groups();
    std::vector<double> mean(m.tau(), 0.0);
    for (std::size_t k = 0; k < m.tau(); ++k) {
        for (std::size_t i : groups[k]) mean[k] += y[i];
        mean[k] /= static_cast<double>(groups[k].size());
    }
    std::vector<std::size_t> order(m.tau());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (mean[a] != mean[b]) return mean[a] < mean[b];
        return groups[a].front() < groups[b].front();
    });
    std::vector<std::size_t> perm(m.tau());
    for (std::size_t r = 0; r < order.size(); ++r) perm[order[r]] = r;
    return permute_labels(m, perm);
}

MembershipMatrix permute_labels(const MembershipMatrix& m, const std::vector<std::size_t>& perm)
{
    if (perm.size() != m.tau()) throw std::invalid_argument("permutation size does not match tau");
    std::vector<std::size_t> labels(m.n());
    for (std::size_t i = 0; i < m.n(); ++i) labels[i] = perm[m.label(i)];
    return MembershipMatrix(m.tau(), std::move(labels));
}

MixtureParams canonicalize(const MixtureParams& p)
{
    if (p.mu.size() != p.tau || p.sigma.size() != p.tau) throw std::invalid_argument("parameter sizes do not match tau");
    std::vector<std::size_t> rep(p.tau);
    std::vector<std::size_t> distinct;
    for (std::size_t k = 0; k < p.tau; ++k) {
        auto it = std::find_if(distinct.begin(), distinct.end(),
                               [&](std::size_t d) { return p.mu[d] == p.mu[k] && p.sigma[d] == p.sigma[k]; });
        if (it == distinct.end()) {
            rep[k] = distinct.size();
            distinct.push_back(k);
        } else {
            rep[k] = static_cast<std::size_t>(it - distinct.begin());
        }
    }
    std::vector<std::size_t> order(distinct.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const std::size_t ka = distinct[a];
        const std::size_t kb = distinct[b];
        if (p.mu[ka] != p.mu[kb]) return p.mu[ka] < p.mu[kb];
        return p.sigma[ka] < p.sigma[kb];
    });
    std::vector<std::size_t> rank(distinct.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

    MixtureParams out;
    out.tau = distinct.size();
    for (std::size_t r = 0; r < order.size(); ++r) {
        out.mu.push_back(p.mu[distinct[order[r]]]);
        out.sigma.push_back(p.sigma[distinct[order[r]]]);
    }
    std::vector<std::size_t> labels(p.membership.n());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = rank[rep[p.membership.label(i)]];
    out.membership = MembershipMatrix(out.tau, std::move(labels));
    return out;
}

Vector generate_mixture(const MixtureParams& params, std::span<const double> u)
{
    const MembershipMatrix& m = params.membership;
    if (u.size() != m.n()) throw std::invalid_argument("noise length does not match membership");
    if (params.mu.size() != m.tau() || params.sigma.size() != m.tau())
        throw std::invalid_argument("parameter sizes do not match tau");
    for (double s : params.sigma)
        if (!(s > 0.0)) throw std::invalid_argument("sigma must be positive");
    Vector y(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) y[i] = params.mu[m.label(i)] + params.sigma[m.label(i)] * u[i];
    return y;
}

std::vector<std::size_t> draw_labels(std::span<const double> weights, std::size_t n, RngStream& rng)
{
    std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = dist(rng);
    return labels;
}

SufficientStats component_stats(std::span<const double> y, const MembershipMatrix& m)
{
    if (y.size() != m.n()) throw std::invalid_argument("membership size does not match data");
    const auto counts = m.counts();
    for (std::size_t c : counts)
        if (c < 2) throw std::invalid_argument("undersized component");
    SufficientStats s{Vector(m.tau(), 0.0), Vector(m.tau(), 0.0)};
    for (std::size_t i = 0; i < y.size(); ++i) s.a[m.label(i)] += y[i];
    for (std::size_t k = 0; k < m.tau(); ++k) s.a[k] /= static_cast<double>(counts[k]);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - s.a[m.label(i)];
        s.b[m.label(i)] += d * d;
    }
    for (double& b : s.b) b = std::sqrt(b);
    return s;
}

namespace {

double variance_floor(std::span<const double> y)
{
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    return std::max(1e-10 * ss / static_cast<double>(y.size()), 1e-300);
}

// Moves points into components with fewer than two members, taking the
// closest point (by dist) from a component that can spare one.
void ensure_min_size(std::vector<std::size_t>& labels, std::size_t tau,
                     const std::function<double(std::size_t, std::size_t)>& dist)
{
    auto counts = label_counts(labels, tau);
    for (std::size_t k = 0; k < tau; ++k) {
        while (counts[k] < 2) {
            std::size_t best = labels.size();
            double best_d = kHuge;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == k || counts[labels[i]] <= 2) continue;
                const double d = dist(i, k);
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            if (best == labels.size()) throw std::runtime_error("cannot satisfy minimum component size");
            --counts[labels[best]];
            labels[best] = k;
            ++counts[k];
        }
    }
}

std::vector<std::size_t> quantile_split(std::span<const double> y, std::size_t tau)
{
    std::vector<std::size_t> idx(y.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    std::vector<std::size_t> labels(y.size());
    for (std::size_t r = 0; r < idx.size(); ++r) labels[idx[r]] = r * tau / idx.size();
    return labels;
}

std::vector<std::size_t> kmeanspp_split(std::span<const double> y, std::size_t tau, RngStream& rng)
{
    const std::size_t n = y.size();
    std::vector<double> centers;
    centers.push_back(y[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
    std::vector<double> d2(n, kHuge);
    while (centers.size() < tau) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = y[i] - centers.back();
            d2[i] = std::min(d2[i], d * d);
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                r -= d2[pick];
                if (r < 0.0) break;
            }
        } else {
            pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        }
        centers.push_back(y[pick]);
    }
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < tau; ++k)
            if (std::abs(y[i] - centers[k]) < std::abs(y[i] - centers[best])) best = k;
        labels[i] = best;
    }
    ensure_min_size(labels, tau, [&](std::size_t i, std::size_t k) { return std::abs(y[i] - centers[k]); });
    return labels;
}

std::vector<std::size_t> initial_labels(std::span<const double> y, std::size_t tau, std::size_t restart,
                                        RngStream& rng)
{
    if (restart == 0) return quantile_split(y, tau);
    return kmeanspp_split(y, tau, rng);
}

struct GaussState {
    std::vector<double> mean;
    std::vector<double> var;
    std::vector<std::size_t> count;
};

double gauss_params(std::span<const double> y, const std::vector<std::size_t>& labels, std::size_t tau,
                    double floor, GaussState& st)
{
    st.mean.assign(tau, 0.0);
    st.var.assign(tau, 0.0);
    st.count.assign(tau, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        st.mean[labels[i]] += y[i];
        ++st.count[labels[i]];
    }
    for (std::size_t k = 0; k < tau; ++k) st.mean[k] /= static_cast<double>(st.count[k]);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - st.mean[labels[i]];
        st.var[labels[i]] += d * d;
    }
    const double n = static_cast<double>(y.size());
    double crit = 0.0;
    for (std::size_t k = 0; k < tau; ++k) {
        const double nk = static_cast<double>(st.count[k]);
        st.var[k] = std::max(st.var[k] / nk, floor);
        crit += nk * std::log(st.var[k]) - 2.0 * nk * std::log(nk / n);
    }
    return crit;
}

std::pair<std::vector<std::size_t>, double> gauss_cem(std::span<const double> y, std::size_t tau,
                                                      std::vector<std::size_t> labels, const FitOptions& opts,
                                                      double floor)
{
    GaussState st;
    std::vector<std::size_t> best_labels = labels;
    double best = kHuge;
    double prev = kHuge;
    const double n = static_cast<double>(y.size());
    std::vector<double> logv(tau);
    std::vector<double> inv(tau);
    for (std::size_t it = 0; it < opts.max_iter; ++it) {
        const double crit = gauss_params(y, labels, tau, floor, st);
        if (crit < best) {
            best = crit;
            best_labels = labels;
        }
        if (!(prev - crit > opts.tol)) break;
        prev = crit;
        for (std::size_t k = 0; k < tau; ++k) {
            logv[k] = std::log(st.var[k]) - 2.0 * std::log(static_cast<double>(st.count[k]) / n);
            inv[k] = 1.0 / st.var[k];
        }
        for (std::size_t i = 0; i < y.size(); ++i) {
            std::size_t arg = 0;
            double low = kHuge;
            for (std::size_t k = 0; k < tau; ++k) {
                const double d = y[i] - st.mean[k];
                const double c = logv[k] + d * d * inv[k];
                if (c < low) {
                    low = c;
                    arg = k;
                }
            }
            labels[i] = arg;
        }
        ensure_min_size(labels, tau, [&](std::size_t i, std::size_t k) {
            const double d = y[i] - st.mean[k];
            return logv[k] + d * d * inv[k];
        });
    }
    return {best_labels, best};
}

}  // namespace

double bic_criterion(std::span<const double> y, const MembershipMatrix& m)
{
    if (y.size() != m.n()) throw std::invalid_argument("membership size does not match data");
    GaussState st;
    const double crit = gauss_params(y, m.labels(), m.tau(), variance_floor(y), st);
    return crit + 2.0 * static_cast<double>(m.tau()) * std::log(static_cast<double>(y.size()));
}

GaussFit fit_gaussian_partition(std::span<const double> y, std::size_t tau, const FitOptions& opts, RngStream& rng)
{
    if (tau == 0 || y.size() < 2 * tau) throw std::invalid_argument("too few points for tau components");
    const double floor = variance_floor(y);
    std::vector<std::size_t> best_labels;
    double best = kHuge;
    const std::size_t restarts = tau == 1 ? 1 : std::max<std::size_t>(opts.fit_budget, 1);
    for (std::size_t r = 0; r < restarts; ++r) {
        auto [labels, crit] = gauss_cem(y, tau, initial_labels(y, tau, r, rng), opts, floor);
        if (crit < best) {
            best = crit;
            best_labels = std::move(labels);
        }
    }
    if (best_labels.empty()) throw std::runtime_error("all EM restarts failed");
    return {MembershipMatrix(tau, std::move(best_labels)),
            best + 2.0 * static_cast<double>(tau) * std::log(static_cast<double>(y.size()))};
}

std::size_t bic_tau_hat(std::span<const double> y, std::size_t tau_max, std::size_t fit_budget, const RngStream& rng)
{
    if (tau_max < 1) throw std::invalid_argument("tau_max must be at least 1");
    if (y.size() <= 2 * tau_max) throw std::invalid_argument("bic_tau_hat needs n > 2 tau_max");
    RngStream local = rng;
    FitOptions opts;
    opts.fit_budget = fit_budget;
    std::size_t best_tau = 1;
    double best = kHuge;
    for (std::size_t tau = 1; tau <= tau_max; ++tau) {
        const double crit = fit_gaussian_partition(y, tau, opts, local).criterion;
        if (crit < best) {
            best = crit;
            best_tau = tau;
        }
    }
    return best_tau;
}

Vector conditional_repro_sample(const SufficientStats& stats, const MembershipMatrix& m,
                                std::span<const double> u_prime)
{
    if (u_prime.size() != m.n()) throw std::invalid_argument("noise length does not match membership");
    if (stats.a.size() != m.tau() || stats.b.size() != m.tau())
        throw std::invalid_argument("statistics size does not match tau");
    const std::size_t tau = m.tau();
    std::vector<double> mean(tau, 0.0);
    std::vector<double> norm(tau, 0.0);
    std::vector<double> scale(tau, 0.0);
    const auto counts = m.counts();
    for (std::size_t i = 0; i < u_prime.size(); ++i) mean[m.label(i)] += u_prime[i];
    for (std::size_t k = 0; k < tau; ++k) mean[k] /= static_cast<double>(counts[k]);
    for (std::size_t i = 0; i < u_prime.size(); ++i) {
        const double d = u_prime[i] - mean[m.label(i)];
        norm[m.label(i)] += d * d;
        scale[m.label(i)] += u_prime[i] * u_prime[i];
    }
    for (std::size_t k = 0; k < tau; ++k) {
        norm[k] = std::sqrt(norm[k]);
        if (!(norm[k] > 1e-14 * std::sqrt(scale[k])) || norm[k] == 0.0) throw DegenerateDirection();
    }
    Vector y(u_prime.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t k = m.label(i);
        y[i] = stats.a[k] + stats.b[k] * (u_prime[i] - mean[k]) / norm[k];
    }
    return y;
}

double statistic_from_counts(const std::map<std::size_t, std::size_t>& counts, std::size_t tau_hat_obs,
                             std::size_t n_mc)
{
    if (n_mc == 0) throw std::invalid_argument("n_mc must be positive");
    const auto it = counts.find(tau_hat_obs);
    const std::size_t c_obs = it == counts.end() ? 0 : it->second;
    std::size_t above = 0;
    for (const auto& [t, c] : counts)
        if (c > c_obs) above += c;
    return static_cast<double>(above) / static_cast<double>(n_mc);
}

NuclearDetail nuclear_statistic_detail(std::span<const double> y_obs, std::size_t tau, const MembershipMatrix& m,
                                       std::size_t n_mc, std::size_t tau_max, const RngStream& rng,
                                       std::size_t fit_budget, std::optional<std::size_t> tau_hat_obs)
{
    if (m.tau() != tau) throw std::invalid_argument("membership tau does not match tau");
    if (m.n() != y_obs.size()) throw std::invalid_argument("membership size does not match data");
    if (n_mc == 0) throw std::invalid_argument("n_mc must be positive");
    const SufficientStats stats = component_stats(y_obs, m);

    NuclearDetail out;
    out.n_mc = n_mc;
    out.tau_hat_obs = tau_hat_obs ? *tau_hat_obs : bic_tau_hat(y_obs, tau_max, fit_budget, rng.derive(0));

    Vector u(y_obs.size());
    for (std::size_t s = 1; s <= n_mc; ++s) {
        RngStream stream = rng.derive(s);
        Vector y_rep;
        for (int attempt = 0;; ++attempt) {
            stream.fill_normal(u);
            try {
                y_rep = conditional_repro_sample(stats, m, u);
                break;
            } catch (const DegenerateDirection&) {
                if (attempt >= 100) throw;
            }
        }
        ++out.counts[bic_tau_hat(y_rep, tau_max, fit_budget, stream)];
    }
    out.statistic = statistic_from_counts(out.counts, out.tau_hat_obs, n_mc);
    return out;
}

double nuclear_statistic(std::span<const double> y_obs, std::size_t tau, const MembershipMatrix& m,
                         std::size_t n_mc, std::size_t tau_max, const RngStream& rng, std::size_t fit_budget)
{
    return nuclear_statistic_detail(y_obs, tau, m, n_mc, tau_max, rng, fit_budget).statistic;
}

namespace {

struct Line {
    double a = 0.0;
    double b = 0.0;
};

double line_params(std::span<const double> y, std::span<const double> u, const std::vector<std::size_t>& labels,
                   std::size_t tau, std::vector<Line>& lines, std::vector<double>& rss_k)
{
    std::vector<double> c(tau, 0.0), su(tau, 0.0), sy(tau, 0.0), suu(tau, 0.0), suy(tau, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t k = labels[i];
        c[k] += 1.0;
        su[k] += u[i];
        sy[k] += y[i];
    }
    std::vector<double> mu(tau), my(tau);
    for (std::size_t k = 0; k < tau; ++k) {
        mu[k] = su[k] / c[k];
        my[k] = sy[k] / c[k];
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t k = labels[i];
        const double du = u[i] - mu[k];
        suu[k] += du * du;
        suy[k] += du * (y[i] - my[k]);
    }
    lines.resize(tau);
    for (std::size_t k = 0; k < tau; ++k) {
        double b = suu[k] > 0.0 ? suy[k] / suu[k] : 0.0;
        if (b < 0.0) b = 0.0;
        lines[k] = {my[k] - b * mu[k], b};
    }
    rss_k.assign(tau, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const Line& l = lines[labels[i]];
        const double r = y[i] - l.a - l.b * u[i];
        rss_k[labels[i]] += r * r;
    }
    return std::accumulate(rss_k.begin(), rss_k.end(), 0.0);
}

}  // namespace

RegressionFit fit_regression_mixture(std::span<const double> y, std::span<const double> u, std::size_t tau,
                                     const FitOptions& opts, RngStream& rng)
{
    if (y.size() != u.size()) throw std::invalid_argument("covariate length does not match data");
    if (tau == 0 || y.size() < 2 * tau) throw std::invalid_argument("too few points for tau components");
    const double n = static_cast<double>(y.size());
    const double floor = variance_floor(y);
    RegressionFit best;
    double best_crit = kHuge;
    const std::size_t restarts = tau == 1 ? 1 : std::max<std::size_t>(opts.fit_budget, 1);
    std::vector<Line> lines;
    std::vector<double> rss_k;
    std::vector<double> cost_shift(tau);
    std::vector<double> inv(tau);
    for (std::size_t r = 0; r < restarts; ++r) {
        std::vector<std::size_t> labels = initial_labels(y, tau, r, rng);
        double prev = kHuge;
        for (std::size_t it = 0; it < opts.max_iter; ++it) {
            const double rss = line_params(y, u, labels, tau, lines, rss_k);
            const auto counts = label_counts(labels, tau);
            double crit = 0.0;
            for (std::size_t k = 0; k < tau; ++k) {
                const double nk = static_cast<double>(counts[k]);
                const double v = std::max(rss_k[k] / nk, floor);
                crit += nk * std::log(v) - 2.0 * nk * std::log(nk / n);
                cost_shift[k] = std::log(v) - 2.0 * std::log(nk / n);
                inv[k] = 1.0 / v;
            }
            if (crit < best_crit) {
                best_crit = crit;
                best.rss = rss;
                best.membership = MembershipMatrix(tau, labels);
                best.intercept.resize(tau);
                best.slope.resize(tau);
                for (std::size_t k = 0; k < tau; ++k) {
                    best.intercept[k] = lines[k].a;
                    best.slope[k] = lines[k].b;
                }
            }
            if (!(prev - crit > opts.tol)) break;
            prev = crit;
            for (std::size_t i = 0; i < y.size(); ++i) {
                std::size_t arg = 0;
                double low = kHuge;
                for (std::size_t k = 0; k < tau; ++k) {
                    const double e = y[i] - lines[k].a - lines[k].b * u[i];
                    const double c = cost_shift[k] + e * e * inv[k];
                    if (c < low) {
                        low = c;
                        arg = k;
                    }
                }
                labels[i] = arg;
            }
            ensure_min_size(labels, tau, [&](std::size_t i, std::size_t k) {
                const double e = y[i] - lines[k].a - lines[k].b * u[i];
                return cost_shift[k] + e * e * inv[k];
            });
        }
    }
    if (best_crit == kHuge) throw std::runtime_error("all EM restarts failed");
    return best;
}

double modified_bic(double rss, std::size_t n, std::size_t tau, double lambda)
{
    const double nn = static_cast<double>(n);
    return nn * std::log((rss + 1.0) / nn) + 2.0 * lambda * static_cast<double>(tau) * std::log(nn);
}

std::vector<std::size_t> CandidateSet::taus() const
{
    std::vector<std::size_t> t;
    for (const auto& e : entries) t.push_back(e.tau);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

bool CandidateSet::contains_tau(std::size_t tau) const
{
    return std::any_of(entries.begin(), entries.end(), [tau](const CandidateEntry& e) { return e.tau == tau; });
}

CandidateSet candidate_set(std::span<const double> y_obs, std::size_t n_candidates, double lambda,
                           std::size_t tau_max, std::size_t fit_budget, const RngStream& rng)
{
    if (n_candidates < 1) throw std::invalid_argument("n_candidates must be at least 1");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (tau_max < 1) throw std::invalid_argument("tau_max must be at least 1");
    const std::size_t n = y_obs.size();
    if (n < 4) throw std::invalid_argument("candidate set needs at least 4 observations");
    const std::size_t tau_top = std::min(tau_max, n / 2);
    FitOptions opts;
    opts.fit_budget = fit_budget;

    CandidateSet out;
    std::map<MembershipMatrix, std::size_t> index;
    std::size_t skipped = 0;
    Vector u(n);
    for (std::size_t s = 0; s < n_candidates; ++s) {
        RngStream stream = rng.derive(s);
        stream.fill_normal(u);
        try {
            double best = kHuge;
            MembershipMatrix best_m;
            for (std::size_t tau = 1; tau <= tau_top; ++tau) {
                const RegressionFit fit = fit_regression_mixture(y_obs, u, tau, opts, stream);
                const double crit = modified_bic(fit.rss, n, tau, lambda);
                if (crit < best) {
                    best = crit;
                    best_m = fit.membership;
                }
            }
            MembershipMatrix canon = canonical_membership(best_m, y_obs);
            if (auto it = index.find(canon); it != index.end()) {
                ++out.entries[it->second].multiplicity;
            } else {
                index.emplace(canon, out.entries.size());
                out.entries.push_back({canon.tau(), std::move(canon), 1});
            }
        } catch (const std::runtime_error&) {
            ++skipped;
        }
    }
    if (skipped > 0)
        out.warnings.push_back("skipped " + std::to_string(skipped) + " replicate(s) after EM failure");
    if (out.entries.empty()) throw std::runtime_error("candidate search produced no entries");
    return out;
}

TauSetResult tau_confidence_detail(std::span<const double> y_obs, const CandidateSet& cands, double alpha,
                                   std::size_t n_mc, std::size_t tau_max, const RngStream& rng,
                                   const TauSetOptions& opts)
{
    if (cands.entries.empty()) throw std::invalid_argument("candidate set is empty");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("invalid level");

    TauSetResult out;
    out.tau_hat_obs = bic_tau_hat(y_obs, tau_max, opts.fit_budget, rng.derive(0));

    std::map<std::size_t, std::vector<const CandidateEntry*>> by_tau;
    for (const auto& e : cands.entries) by_tau[e.tau].push_back(&e);

    std::vector<ParamValue> included;
    for (auto& [tau, list] : by_tau) {
        std::stable_sort(list.begin(), list.end(), [](const CandidateEntry* a, const CandidateEntry* b) {
            return a->multiplicity > b->multiplicity;
        });
        double low = kHuge;
        for (const CandidateEntry* e : list) {
            const double stat = nuclear_statistic_detail(y_obs, tau, e->membership, n_mc, tau_max, rng,
                                                         opts.fit_budget, out.tau_hat_obs)
                                    .statistic;
            low = std::min(low, stat);
            if (opts.short_circuit && low <= alpha) break;
        }
        out.min_statistic[tau] = low;
        if (low <= alpha) included.push_back({static_cast<double>(tau)});
    }

    out.set.level = alpha;
    out.set.content = DiscreteSet(std::move(included));
    out.set.meta.seed = rng.seed();
    out.set.meta.n_mc = n_mc;
    out.set.meta.warnings = cands.warnings;
    if (out.set.empty()) out.set.warn("empty confidence set");
    return out;
}

ConfidenceSet tau_confidence_set(std::span<const double> y_obs, const CandidateSet& cands, double alpha,
                                 std::size_t n_mc, std::size_t tau_max, const RngStream& rng,
                                 std::size_t fit_budget)
{
    TauSetOptions opts;
    opts.fit_budget = fit_budget;
    return tau_confidence_detail(y_obs, cands, alpha, n_mc, tau_max, rng, opts).set;
}

std::vector<bool> span_overlap_flags(std::span<const double> y, const MembershipMatrix& m)
{
    if (y.size() != m.n()) throw std::invalid_argument("membership size does not match data");
    std::vector<double> lo(m.tau(), kHuge);
    std::vector<double> hi(m.tau(), -kHuge);
    for (std::size_t i = 0; i < y.size(); ++i) {
        lo[m.label(i)] = std::min(lo[m.label(i)], y[i]);
        hi[m.label(i)] = std::max(hi[m.label(i)], y[i]);
    }
    std::vector<bool> flags(y.size(), false);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t k = 0; k < m.tau(); ++k)
            if (k != m.label(i) && lo[k] <= y[i] && y[i] <= hi[k]) {
                flags[i] = true;
                break;
            }
    return flags;
}

namespace {

struct Hull {
    double lo = kHuge;
    double hi = -kHuge;
    bool any = false;

    void add(const RealUnion& u)
    {
        if (u.empty()) return;
        lo = std::min(lo, u.lower());
        hi = std::max(hi, u.upper());
        any = true;
    }
};

ConfidenceSet hull_set(double alpha, const std::map<std::size_t, Hull>& hulls, std::vector<std::string> warnings)
{
    ProductSet p;
    for (const auto& [tau, h] : hulls) {
        if (!h.any) continue;
        p.entries.emplace_back(ParamValue{static_cast<double>(tau)},
                               RealUnion({Interval{h.lo, h.hi, !std::isinf(h.lo), !std::isinf(h.hi)}}));
    }
    ConfidenceSet set{alpha, std::move(p), {}};
    set.meta.warnings = std::move(warnings);
    if (set.empty()) set.warn("empty confidence set");
    return set;
}

}  // namespace

MuSigmaSets mu_sigma_confidence_sets(std::span<const double> y_obs, const CandidateSet& cands, double alpha,
                                     quantile::MadCalibrationCache& calib)
{
    if (cands.entries.empty()) throw std::invalid_argument("candidate set is empty");
    std::size_t max_tau = 0;
    for (const auto& e : cands.entries) max_tau = std::max(max_tau, e.tau);

    std::vector<std::map<std::size_t, Hull>> mu_hull(max_tau);
    std::vector<std::map<std::size_t, Hull>> sigma_hull(max_tau);
    std::vector<std::vector<std::string>> sigma_warn(max_tau);

    for (const auto& e : cands.entries) {
        const auto flags = span_overlap_flags(y_obs, e.membership);
        const auto groups = e.membership.groups();
        for (std::size_t k = 0; k < e.tau; ++k) {
            std::vector<double> d;
            std::vector<bool> f;
            for (std::size_t i : groups[k]) {
                d.push_back(y_obs[i]);
                f.push_back(flags[i]);
            }
            const double delta = quantile::estimate_delta(d, f);
            mu_hull[k][e.tau].add(quantile::robust_location_ci(d, alpha, delta).real_union());
            if (d.size() < 3) {
                const std::string w = "component too small for scale calibration (tau*=" + std::to_string(e.tau) +
                                      ", k=" + std::to_string(k + 1) + ")";
                if (std::find(sigma_warn[k].begin(), sigma_warn[k].end(), w) == sigma_warn[k].end())
                    sigma_warn[k].push_back(w);
                continue;
            }
            const auto scale = quantile::robust_scale_ci(d, alpha, calib.get(d.size()));
            sigma_hull[k][e.tau].add(scale.real_union());
        }
    }

    MuSigmaSets out;
    for (std::size_t k = 0; k < max_tau; ++k) {
        out.mu.push_back(hull_set(alpha, mu_hull[k], {}));
        out.sigma.push_back(hull_set(alpha, sigma_hull[k], sigma_warn[k]));
    }
    return out;
}

}  // namespace reprosamp::mixture
