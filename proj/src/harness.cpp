#include "reprosamp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/negative_binomial.hpp>

#include "reprosamp/binomial.hpp"
#include "reprosamp/mixture.hpp"
#include "reprosamp/neyman.hpp"
#include "reprosamp/parallel.hpp"
#include "reprosamp/quantile.hpp"
#include "reprosamp/rng.hpp"

namespace reprosamp::harness {

namespace {

constexpr std::uint64_t kMadStream = 0x6d6164;

const std::map<std::string, Study>& study_names()
{
    static const std::map<std::string, Study> names{
        {"binomial_table1", Study::binomial_table1}, {"uniform_example", Study::uniform_example},
        {"lrt_compare", Study::lrt_compare},         {"quantile_figB1", Study::quantile_figB1},
        {"mixture_tau", Study::mixture_tau},         {"mixture_musigma", Study::mixture_musigma},
    };
    return names;
}

const std::set<std::string>& allowed_keys(Study s)
{
    static const std::set<std::string> binomial{"n", "theta0", "alpha", "grid_step"};
    static const std::set<std::string> uniform{"n", "theta0", "alpha"};
    static const std::set<std::string> lrt{"n", "theta0", "alpha"};
    static const std::set<std::string> quant{"n", "zeta", "dist", "alpha", "nb_size", "nb_prob"};
    static const std::set<std::string> mix{"n",      "tau0",     "alpha",      "candidates", "n_mc",
                                           "lambda", "tau_max",  "fit_budget", "mu",         "sigma",
                                           "weights", "n_sim"};
    switch (s) {
    case Study::binomial_table1: return binomial;
    case Study::uniform_example: return uniform;
    case Study::lrt_compare: return lrt;
    case Study::quantile_figB1: return quant;
    case Study::mixture_tau:
    case Study::mixture_musigma: return mix;
    }
    return binomial;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v))
        throw StudyError("invalid value for '" + key + "': '" + text + "'");
    return v;
}

std::size_t parse_count(const std::string& key, const std::string& text)
{
    const double v = parse_double(key, text);
    if (v < 0 || v != std::floor(v) || v > 1e15)
        throw StudyError("invalid value for '" + key + "': '" + text + "' (expected a non-negative integer)");
    return static_cast<std::size_t>(v);
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

ScenarioRow make_row(std::string scenario)
{
    ScenarioRow row;
    row.scenario = std::move(scenario);
    return row;
}

std::string fmt_g(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

struct MixtureTruth {
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<double> weights;
};

MixtureTruth table_params(std::size_t tau0)
{
    switch (tau0) {
    case 2: return {{0.2206, 0.3654}, {0.0571, 0.1012}, {0.7057, 0.2943}};
    case 3: return {{0.1887, 0.2809, 0.4199}, {0.0414, 0.0474, 0.0886}, {0.4453, 0.3866, 0.168}};
    case 4:
        return {{0.1804, 0.2556, 0.3351, 0.4403}, {0.0362, 0.0268, 0.0359, 0.086},
                {0.4018, 0.2941, 0.1742, 0.1299}};
    default: return {};
    }
}

struct MixtureSettings {
    std::size_t n, tau0, candidates, n_mc, tau_max, fit_budget, n_sim;
    double alpha, lambda;
    MixtureTruth truth;
};

MixtureSettings mixture_settings(const StudyConfig& c)
{
    MixtureSettings s{};
    s.n = c.get_count("n", 190);
    s.tau0 = c.get_count("tau0", 3);
    s.alpha = c.get_double("alpha", 0.95);
    s.candidates = c.get_count("candidates", c.paper_scale ? 200 : 100);
    s.n_mc = c.get_count("n_mc", c.paper_scale ? 1000 : 300);
    s.lambda = c.get_double("lambda", 2.5);
    s.tau_max = c.get_count("tau_max", 10);
    s.fit_budget = c.get_count("fit_budget", 5);
    s.n_sim = c.get_count("n_sim", 5000);
    const MixtureTruth table = table_params(s.tau0);
    s.truth.mu = c.get_list("mu", table.mu);
    s.truth.sigma = c.get_list("sigma", table.sigma);
    s.truth.weights = c.get_list("weights", table.weights);
    return s;
}

void check_level(const std::string& key, double v)
{
    if (!(v > 0.0 && v < 1.0)) throw StudyError("'" + key + "' must lie in (0, 1)");
}

// Runs fn for every replication; a throwing replication becomes an empty slot
// and a failure_log line, in replication order.
template <class R>
std::vector<std::optional<R>> replicate(const StudyConfig& cfg, std::size_t reps, const std::string& scenario,
                                        StudyReport& report, const std::function<R(std::size_t)>& fn)
{
    std::vector<std::optional<R>> out(reps);
    std::vector<std::string> errors(reps);
    parallel_for(reps, cfg.workers, [&](std::size_t i) {
        try {
            out[i] = fn(i);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        } catch (...) {
            errors[i] = "unknown error";
        }
    });
    for (std::size_t i = 0; i < reps; ++i) {
        if (out[i]) continue;
        ++report.failures;
        report.failure_log.push_back(scenario + " rep " + std::to_string(i) + ": " + errors[i]);
    }
    return out;
}

RngStream rep_stream(const StudyConfig& cfg, std::size_t scenario, std::size_t rep)
{
    return RngStream(cfg.seed, 0).derive(scenario).derive(rep);
}

struct PairOutcome {
    int covered_a = 0;
    int covered_b = 0;
    double width_a = 0.0;
    double width_b = 0.0;
    int flag = 0;
    int flag2 = 0;
};

void finish_pair(StudyReport& report, const std::vector<std::optional<PairOutcome>>& outs, const std::string& name_a,
                 const std::string& name_b, ScenarioRow*& row_a, ScenarioRow*& row_b)
{
    std::vector<int> ca, cb;
    std::vector<double> wa, wb;
    for (const auto& o : outs) {
        if (!o) continue;
        ca.push_back(o->covered_a);
        cb.push_back(o->covered_b);
        wa.push_back(o->width_a);
        wb.push_back(o->width_b);
    }
    report.rows.push_back(make_row(name_a));
    aggregate(report.rows.back(), ca, wa);
    report.rows.push_back(make_row(name_b));
    aggregate(report.rows.back(), cb, wb);
    row_a = &report.rows[report.rows.size() - 2];
    row_b = &report.rows.back();
}

void run_binomial(const StudyConfig& cfg, std::size_t reps, StudyReport& report)
{
    const int n = static_cast<int>(cfg.get_count("n", 20));
    const double alpha = cfg.get_double("alpha", 0.95);
    const auto thetas = cfg.get_list("theta0", {0.1, 0.4, 0.8});
    const binomial::AcceptanceTable table(n, alpha, cfg.get_double("grid_step", 0.0005));
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        const double theta0 = thetas[j];
        const std::string tag = "theta0=" + fmt_g(theta0, 6);
        auto outs = replicate<PairOutcome>(cfg, reps, tag, report, [&](std::size_t rep) {
            RngStream rng = rep_stream(cfg, j, rep);
            const int y = std::binomial_distribution<int>(n, theta0)(rng);
            const auto repro = table.repro_set(y);
            const auto wald = binomial::wald_interval(y, n, alpha);
            return PairOutcome{repro.real_union().contains(theta0), wald.real_union().contains(theta0),
                               repro.real_union().length(), wald.real_union().length()};
        });
        ScenarioRow *a = nullptr, *b = nullptr;
        finish_pair(report, outs, "repro:" + tag, "wald:" + tag, a, b);
    }
}

std::vector<double> uniform_sample(RngStream& rng, std::size_t n, double theta0)
{
    std::vector<double> y(n);
    for (double& v : y) v = theta0 + (2.0 * rng.uniform() - 1.0);
    return y;
}

void run_uniform(const StudyConfig& cfg, std::size_t reps, StudyReport& report)
{
    const std::size_t n = cfg.get_count("n", 3);
    const double theta0 = cfg.get_double("theta0", 0.0);
    const double alpha = cfg.get_double("alpha", 0.95);
    auto outs = replicate<PairOutcome>(cfg, reps, "uniform", report, [&](std::size_t rep) {
        RngStream rng = rep_stream(cfg, 0, rep);
        const auto s = neyman::UniformLocationSample::from(uniform_sample(rng, n, theta0));
        const auto test = neyman::uniform_mean_test_ci(s, alpha);
        const auto repro = neyman::uniform_mean_repro_ci(s, alpha);
        const auto inc = neyman::inclusion_check(repro, test);
        return PairOutcome{test.real_union().contains(theta0), repro.real_union().contains(theta0),
                           test.real_union().length(), repro.real_union().length(),
                           inc == neyman::Inclusion::strict_subset, inc == neyman::Inclusion::violation};
    });
    ScenarioRow *test = nullptr, *repro = nullptr;
    finish_pair(report, outs, "mean_test:n=" + std::to_string(n), "repro:n=" + std::to_string(n), test, repro);
    double strict = 0, violations = 0;
    for (const auto& o : outs)
        if (o) {
            strict += o->flag;
            violations += o->flag2;
        }
    repro->extra["strict_subset"] = strict;
    repro->extra["violations"] = violations;
}

std::vector<std::vector<std::optional<PairOutcome>>> lrt_outcomes(const StudyConfig& cfg, std::size_t reps,
                                                                  StudyReport& report)
{
    const auto ns = cfg.get_list("n", {10, 20, 200});
    const double theta0 = cfg.get_double("theta0", 0.0);
    const double alpha = cfg.get_double("alpha", 0.95);
    std::vector<std::vector<std::optional<PairOutcome>>> all;
    for (std::size_t j = 0; j < ns.size(); ++j) {
        const auto n = static_cast<std::size_t>(ns[j]);
        all.push_back(replicate<PairOutcome>(cfg, reps, "n=" + std::to_string(n), report, [&](std::size_t rep) {
            RngStream rng = rep_stream(cfg, j, rep);
            const auto s = neyman::UniformLocationSample::from(uniform_sample(rng, n, theta0));
            const auto os = neyman::uniform_orderstat_ci(s, alpha);
            const auto lrt = neyman::uniform_lrt_ci(s, alpha);
            const auto inc = neyman::inclusion_check(neyman::uniform_lrt_repro_ci(s, alpha), lrt);
            return PairOutcome{os.real_union().contains(theta0), lrt.real_union().contains(theta0),
                               os.real_union().length(), lrt.real_union().length(),
                               inc == neyman::Inclusion::strict_subset, inc == neyman::Inclusion::violation};
        }));
    }
    return all;
}

void run_lrt(const StudyConfig& cfg, std::size_t reps, StudyReport& report)
{
    const auto ns = cfg.get_list("n", {10, 20, 200});
    const auto all = lrt_outcomes(cfg, reps, report);
    for (std::size_t j = 0; j < ns.size(); ++j) {
        const std::string tag = "n=" + std::to_string(static_cast<std::size_t>(ns[j]));
        ScenarioRow *os = nullptr, *lrt = nullptr;
        finish_pair(report, all[j], "orderstat:" + tag, "lrt:" + tag, os, lrt);
        std::vector<double> wa, wb;
        double strict = 0, violations = 0;
        for (const auto& o : all[j]) {
            if (!o) continue;
            wa.push_back(o->width_a);
            wb.push_back(o->width_b);
            strict += o->flag;
            violations += o->flag2;
        }
        const auto cmp = paired_width_comparison(static_cast<std::size_t>(ns[j]), wa, wb);
        os->extra["mean_diff_vs_lrt"] = cmp.mean_diff;
        os->extra["diff_se"] = cmp.diff_se;
        os->extra["frac_shorter"] = cmp.frac_a_shorter;
        lrt->extra["repro_strict_subset"] = strict;
        lrt->extra["violations"] = violations;
    }
}

double negbin_quantile(double size, double prob, double zeta)
{
    const boost::math::negative_binomial_distribution<double> nb(size, prob);
    double k = 0.0;
    while (boost::math::cdf(nb, k) < zeta) k += 1.0;
    return k;
}

void run_quantile(const StudyConfig& cfg, std::size_t reps, StudyReport& report)
{
    const std::size_t n = cfg.get_count("n", 60);
    const double alpha = cfg.get_double("alpha", 0.95);
    const auto zetas = cfg.get_list("zeta", {0.1, 0.3, 0.5, 0.7, 0.9});
    const auto dists = cfg.get_names("dist", {"cauchy", "negbin"});
    const double nb_size = cfg.get_double("nb_size", 2.0);
    const double nb_prob = cfg.get_double("nb_prob", 0.1);
    std::size_t scenario = 0;
    for (const auto& dist : dists) {
        for (double zeta : zetas) {
            const bool cauchy = dist == "cauchy";
            const double truth = cauchy ? std::tan(M_PI * (zeta - 0.5)) : negbin_quantile(nb_size, nb_prob, zeta);
            const std::string tag = dist + ":zeta=" + fmt_g(zeta, 6);
            const std::size_t sc = scenario++;
            auto outs = replicate<PairOutcome>(cfg, reps, tag, report, [&](std::size_t rep) {
                RngStream rng = rep_stream(cfg, sc, rep);
                std::vector<double> y(n);
                if (cauchy) {
                    std::cauchy_distribution<double> d(0.0, 1.0);
                    for (double& v : y) v = d(rng);
                } else {
                    std::negative_binomial_distribution<int> d(static_cast<int>(nb_size), nb_prob);
                    for (double& v : y) v = d(rng);
                }
                const auto ci = quantile::quantile_ci(quantile::OrderedSample(std::move(y)), zeta, alpha);
                return PairOutcome{ci.real_union().contains(truth), 0, ci.real_union().length(), 0.0};
            });
            std::vector<int> cov;
            std::vector<double> w;
            for (const auto& o : outs)
                if (o) {
                    cov.push_back(o->covered_a);
                    w.push_back(o->width_a);
                }
            report.rows.push_back(make_row(tag));
            aggregate(report.rows.back(), cov, w);
            report.rows.back().extra["true_quantile"] = truth;
        }
    }
}

struct MixtureData {
    std::vector<double> y;
    mixture::CandidateSet cands;
};

MixtureData mixture_data(const StudyConfig& cfg, const MixtureSettings& s, std::size_t rep)
{
    RngStream rng = rep_stream(cfg, 0, rep);
    const auto labels = mixture::draw_labels(s.truth.weights, s.n, rng);
    const auto u = rng.normal_vector(s.n);
    MixtureData d;
    d.y.resize(s.n);
    for (std::size_t i = 0; i < s.n; ++i) d.y[i] = s.truth.mu[labels[i]] + s.truth.sigma[labels[i]] * u[i];
    d.cands = mixture::candidate_set(d.y, s.candidates, s.lambda, s.tau_max, s.fit_budget, rng.derive(1));
    return d;
}

void run_mixture_tau(const StudyConfig& cfg, std::size_t reps, StudyReport& report)
{
    const auto s = mixture_settings(cfg);
    struct Outcome {
        std::vector<double> set;
        int covered = 0;
        int cand_has_tau0 = 0;
        int tau_hat_is_tau0 = 0;
        double entries = 0.0;
    };
    const std::string tag = "tau0=" + std::to_string(s.tau0);
    auto outs = replicate<Outcome>(cfg, reps, tag, report, [&](std::size_t rep) {
        const auto d = mixture_data(cfg, s, rep);
        const auto res = mixture::tau_confidence_detail(d.y, d.cands, s.alpha, s.n_mc, s.tau_max,
                                                        rep_stream(cfg, 0, rep).derive(2), {s.fit_budget, true});
        Outcome o;
        for (const auto& v : res.set.discrete().values()) o.set.push_back(v[0]);
        o.covered = res.set.discrete().contains({static_cast<double>(s.tau0)});
        o.cand_has_tau0 = d.cands.contains_tau(s.tau0);
        o.tau_hat_is_tau0 = res.tau_hat_obs == s.tau0;
        o.entries = static_cast<double>(d.cands.entries.size());
        return o;
    });
    ScenarioRow row = make_row(tag);
    std::vector<int> cov;
    std::vector<double> sizes;
    double cand = 0, hat = 0, entries = 0;
    for (const auto& o : outs) {
        if (!o) continue;
        cov.push_back(o->covered);
        sizes.push_back(static_cast<double>(o->set.size()));
        row.sets.push_back(o->set);
        cand += o->cand_has_tau0;
        hat += o->tau_hat_is_tau0;
        entries += o->entries;
    }
    aggregate(row, cov, sizes);
    const double m = std::max<double>(1.0, static_cast<double>(cov.size()));
    row.extra["candidate_contains_tau0"] = cand / m;
    row.extra["tau_hat_equals_tau0"] = hat / m;
    row.extra["mean_candidate_entries"] = entries / m;
    report.rows.push_back(std::move(row));
}

void run_mixture_musigma(const StudyConfig& cfg, std::size_t reps, StudyReport& report)
{
    const auto s = mixture_settings(cfg);
    quantile::MadCalibrationCache cache(s.alpha, s.n_sim, RngStream(cfg.seed, kMadStream));
    const ParamValue key{static_cast<double>(s.tau0)};
    struct Outcome {
        std::vector<int> covered;
        std::vector<double> width;
    };
    auto outs = replicate<Outcome>(cfg, reps, "tau0=" + std::to_string(s.tau0), report, [&](std::size_t rep) {
        const auto d = mixture_data(cfg, s, rep);
        const auto sets = mixture::mu_sigma_confidence_sets(d.y, d.cands, s.alpha, cache);
        Outcome o;
        for (int which = 0; which < 2; ++which) {
            const auto& list = which == 0 ? sets.mu : sets.sigma;
            const auto& truth = which == 0 ? s.truth.mu : s.truth.sigma;
            for (std::size_t k = 0; k < s.tau0; ++k) {
                const RealUnion* u = k < list.size() ? list[k].product().find(key) : nullptr;
                o.covered.push_back(u && u->contains(truth[k]));
                o.width.push_back(u ? u->length() : std::nan(""));
            }
        }
        return o;
    });
    for (std::size_t j = 0; j < 2 * s.tau0; ++j) {
        const std::string tag =
            std::string(j < s.tau0 ? "mu" : "sigma") + ":k=" + std::to_string(j % s.tau0 + 1);
        std::vector<int> cov;
        std::vector<double> w;
        double missing = 0;
        for (const auto& o : outs) {
            if (!o) continue;
            cov.push_back(o->covered[j]);
            w.push_back(o->width[j]);
            if (std::isnan(o->width[j])) ++missing;
        }
        ScenarioRow row = make_row(tag);
        aggregate(row, cov, w);
        row.extra["tau0_missing"] = missing;
        report.rows.push_back(std::move(row));
    }
}

nlohmann::json num(double v)
{
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double num_from(const nlohmann::json& j)
{
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    return std::nan("");
}

}  // namespace

const char* to_string(Study s)
{
    for (const auto& [name, v] : study_names())
        if (v == s) return name.c_str();
    return "unknown";
}

Study parse_study(const std::string& name)
{
    const auto it = study_names().find(name);
    if (it == study_names().end()) throw StudyError("unknown study '" + name + "'");
    return it->second;
}

double StudyConfig::get_double(const std::string& key, double fallback) const
{
    const auto it = params.find(key);
    return it == params.end() ? fallback : parse_double(key, it->second);
}

std::size_t StudyConfig::get_count(const std::string& key, std::size_t fallback) const
{
    const auto it = params.find(key);
    return it == params.end() ? fallback : parse_count(key, it->second);
}

std::vector<double> StudyConfig::get_list(const std::string& key, const std::vector<double>& fallback) const
{
    const auto it = params.find(key);
    if (it == params.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) out.push_back(parse_double(key, item));
    return out;
}

std::vector<std::string> StudyConfig::get_names(const std::string& key,
                                                const std::vector<std::string>& fallback) const
{
    const auto it = params.find(key);
    return it == params.end() ? fallback : split_list(it->second);
}

StudyConfig parse_config(std::istream& in, std::optional<Study> study)
{
    StudyConfig cfg;
    if (study) cfg.study = *study;
    bool have_study = study.has_value();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw StudyError("config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw StudyError("config line " + std::to_string(line_no) + ": empty key");
        if (key == "study") {
            const Study s = parse_study(value);
            if (study && s != *study)
                throw StudyError("config names study '" + value + "' but '" + to_string(*study) + "' was requested");
            cfg.study = s;
            have_study = true;
        } else if (key == "reps") {
            cfg.reps = parse_count(key, value);
            if (cfg.reps == 0) throw StudyError("reps must be at least 1");
        } else if (key == "seed") {
            std::size_t used = 0;
            try {
                cfg.seed = std::stoull(value, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != value.size()) throw StudyError("invalid value for 'seed': '" + value + "'");
        } else if (key == "workers") {
            cfg.workers = std::max<std::size_t>(1, parse_count(key, value));
        } else if (key == "paper_scale") {
            cfg.paper_scale = value == "1" || value == "true";
        } else {
            cfg.params[key] = value;
        }
    }
    if (!have_study) throw StudyError("config does not name a study");
    return cfg;
}

StudyConfig load_config(const std::string& path, std::optional<Study> study)
{
    std::ifstream in(path);
    if (!in) throw StudyError("cannot open config '" + path + "'");
    return parse_config(in, study);
}

void validate(const StudyConfig& c)
{
    const auto& allowed = allowed_keys(c.study);
    for (const auto& [key, value] : c.params)
        if (!allowed.count(key)) throw StudyError("unknown key '" + key + "' for study " + to_string(c.study));
    check_level("alpha", c.get_double("alpha", 0.95));
    switch (c.study) {
    case Study::binomial_table1:
        if (c.get_count("n", 20) < 1) throw StudyError("'n' must be at least 1");
        for (double t : c.get_list("theta0", {0.1})) check_level("theta0", t);
        if (const double g = c.get_double("grid_step", 0.0005); !(g > 0.0 && g < 0.5))
            throw StudyError("'grid_step' must lie in (0, 0.5)");
        break;
    case Study::uniform_example:
        if (c.get_count("n", 3) < 1) throw StudyError("'n' must be at least 1");
        c.get_double("theta0", 0.0);
        break;
    case Study::lrt_compare:
        for (double n : c.get_list("n", {10}))
            if (n < 2 || n != std::floor(n)) throw StudyError("'n' entries must be integers >= 2");
        c.get_double("theta0", 0.0);
        break;
    case Study::quantile_figB1:
        if (c.get_count("n", 60) < 1) throw StudyError("'n' must be at least 1");
        for (double z : c.get_list("zeta", {0.5})) check_level("zeta", z);
        for (const auto& d : c.get_names("dist", {"cauchy"}))
            if (d != "cauchy" && d != "negbin") throw StudyError("unknown dist '" + d + "'");
        if (const double sz = c.get_double("nb_size", 2.0); sz < 1 || sz != std::floor(sz))
            throw StudyError("'nb_size' must be a positive integer");
        check_level("nb_prob", c.get_double("nb_prob", 0.1));
        break;
    case Study::mixture_tau:
    case Study::mixture_musigma: {
        const auto s = mixture_settings(c);
        if (s.tau0 < 1) throw StudyError("'tau0' must be at least 1");
        if (s.truth.mu.size() != s.tau0 || s.truth.sigma.size() != s.tau0 || s.truth.weights.size() != s.tau0)
            throw StudyError("mu, sigma and weights must each have tau0 entries");
        for (double v : s.truth.sigma)
            if (!(v > 0)) throw StudyError("'sigma' entries must be positive");
        for (double v : s.truth.weights)
            if (!(v > 0)) throw StudyError("'weights' entries must be positive");
        if (s.tau_max < s.tau0) throw StudyError("'tau_max' must be at least tau0");
        if (s.n <= 2 * s.tau_max) throw StudyError("'n' must exceed 2 * tau_max");
        if (s.candidates < 1 || s.n_mc < 1 || s.fit_budget < 1)
            throw StudyError("candidates, n_mc and fit_budget must be at least 1");
        if (!(s.lambda > 0)) throw StudyError("'lambda' must be positive");
        if (s.n_sim < 1000) throw StudyError("'n_sim' must be at least 1000");
        break;
    }
    }
}

std::size_t default_reps(const StudyConfig& c)
{
    if (c.reps > 0) return c.reps;
    switch (c.study) {
    case Study::binomial_table1:
    case Study::uniform_example:
    case Study::quantile_figB1: return 1000;
    case Study::lrt_compare: return 5000;
    case Study::mixture_tau:
    case Study::mixture_musigma: return c.paper_scale ? 200 : 50;
    }
    return 1000;
}

const ScenarioRow& StudyReport::row(const std::string& scenario) const
{
    for (const auto& r : rows)
        if (r.scenario == scenario) return r;
    throw std::out_of_range("no scenario '" + scenario + "'");
}

void aggregate(ScenarioRow& row, const std::vector<int>& covered, const std::vector<double>& widths)
{
    row.reps = covered.size();
    if (covered.empty()) return;
    double hits = 0;
    for (int c : covered) hits += c;
    const double r = static_cast<double>(covered.size());
    row.coverage = hits / r;
    row.coverage_se = std::sqrt(row.coverage * (1.0 - row.coverage) / r);

    std::vector<double> finite;
    double infinite = 0;
    for (double w : widths) {
        if (std::isfinite(w))
            finite.push_back(w);
        else if (std::isinf(w))
            ++infinite;
    }
    if (infinite > 0) row.extra["infinite_widths"] = infinite;
    if (finite.empty()) {
        row.mean_width = infinite > 0 ? kInf : 0.0;
        row.width_se = 0.0;
        return;
    }
    double sum = 0;
    for (double w : finite) sum += w;
    const double k = static_cast<double>(finite.size());
    row.mean_width = sum / k;
    double ss = 0;
    for (double w : finite) ss += (w - row.mean_width) * (w - row.mean_width);
    const double sd = finite.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    row.width_se = sd / std::sqrt(k);
    row.extra["width_sd"] = sd;
}

StudyReport run_study(const StudyConfig& config)
{
    validate(config);
    const std::size_t reps = default_reps(config);
    StudyReport report;
    report.study = to_string(config.study);
    report.seed = config.seed;
    report.reps = reps;
    std::size_t scenarios = 1;
    switch (config.study) {
    case Study::binomial_table1:
        scenarios = config.get_list("theta0", {0.1, 0.4, 0.8}).size();
        run_binomial(config, reps, report);
        break;
    case Study::uniform_example: run_uniform(config, reps, report); break;
    case Study::lrt_compare:
        scenarios = config.get_list("n", {10, 20, 200}).size();
        run_lrt(config, reps, report);
        break;
    case Study::quantile_figB1:
        scenarios = config.get_list("zeta", {0.1, 0.3, 0.5, 0.7, 0.9}).size() *
                    config.get_names("dist", {"cauchy", "negbin"}).size();
        run_quantile(config, reps, report);
        break;
    case Study::mixture_tau: run_mixture_tau(config, reps, report); break;
    case Study::mixture_musigma: run_mixture_musigma(config, reps, report); break;
    }
    const double attempted = static_cast<double>(reps * scenarios);
    if (static_cast<double>(report.failures) > 0.01 * attempted) {
        std::string msg = std::to_string(report.failures) + " of " + std::to_string(reps * scenarios) +
                          " replications failed";
        if (!report.failure_log.empty()) msg += "; first: " + report.failure_log.front();
        throw StudyError(msg);
    }
    return report;
}

SetHistogram tau_set_histogram(const std::vector<StudyReport>& reports)
{
    SetHistogram h;
    for (const auto& r : reports)
        for (const auto& row : r.rows)
            for (const auto& s : row.sets) ++h[s];
    return h;
}

PairedComparison paired_width_comparison(std::size_t n, const std::vector<double>& width_a,
                                         const std::vector<double>& width_b)
{
    if (width_a.size() != width_b.size()) throw std::invalid_argument("paired widths differ in length");
    PairedComparison c;
    c.n = n;
    c.reps = width_a.size();
    if (width_a.empty()) return c;
    const double r = static_cast<double>(c.reps);
    double sa = 0, sb = 0, shorter = 0;
    for (std::size_t i = 0; i < c.reps; ++i) {
        sa += width_a[i];
        sb += width_b[i];
        shorter += width_a[i] < width_b[i];
    }
    c.mean_a = sa / r;
    c.mean_b = sb / r;
    c.mean_diff = c.mean_a - c.mean_b;
    double ss = 0;
    for (std::size_t i = 0; i < c.reps; ++i) {
        const double d = width_a[i] - width_b[i] - c.mean_diff;
        ss += d * d;
    }
    c.diff_se = c.reps > 1 ? std::sqrt(ss / (r - 1.0) / r) : 0.0;
    c.frac_a_shorter = shorter / r;
    return c;
}

std::vector<PairedComparison> lrt_width_comparison(const StudyConfig& config)
{
    if (config.study != Study::lrt_compare) throw StudyError("lrt_width_comparison needs an lrt_compare config");
    validate(config);
    StudyReport scratch;
    const auto ns = config.get_list("n", {10, 20, 200});
    const auto all = lrt_outcomes(config, default_reps(config), scratch);
    std::vector<PairedComparison> out;
    for (std::size_t j = 0; j < ns.size(); ++j) {
        std::vector<double> wa, wb;
        for (const auto& o : all[j])
            if (o) {
                wa.push_back(o->width_a);
                wb.push_back(o->width_b);
            }
        out.push_back(paired_width_comparison(static_cast<std::size_t>(ns[j]), wa, wb));
    }
    return out;
}

ReportFormat parse_format(const std::string& name)
{
    if (name == "csv") return ReportFormat::csv;
    if (name == "json") return ReportFormat::json;
    throw StudyError("unknown format '" + name + "'");
}

const char* const kCsvHeader = "study,scenario,reps,coverage,coverage_se,mean_width,width_se,extra";

nlohmann::json report_to_json(const StudyReport& report)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json extra = nlohmann::json::object();
        for (const auto& [k, v] : r.extra) extra[k] = num(v);
        nlohmann::json row{{"scenario", r.scenario},       {"reps", r.reps},
                           {"coverage", num(r.coverage)}, {"coverage_se", num(r.coverage_se)},
                           {"mean_width", num(r.mean_width)}, {"width_se", num(r.width_se)},
                           {"extra", extra}};
        if (!r.sets.empty()) row["sets"] = r.sets;
        rows.push_back(std::move(row));
    }
    return {{"study", report.study},       {"seed", report.seed},
            {"reps", report.reps},         {"failures", report.failures},
            {"failure_log", report.failure_log}, {"rows", rows}};
}

StudyReport report_from_json(const nlohmann::json& j)
{
    StudyReport r;
    r.study = j.at("study").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.reps = j.at("reps").get<std::size_t>();
    r.failures = j.at("failures").get<std::size_t>();
    r.failure_log = j.at("failure_log").get<std::vector<std::string>>();
    for (const auto& jr : j.at("rows")) {
        ScenarioRow row;
        row.scenario = jr.at("scenario").get<std::string>();
        row.reps = jr.at("reps").get<std::size_t>();
        row.coverage = num_from(jr.at("coverage"));
        row.coverage_se = num_from(jr.at("coverage_se"));
        row.mean_width = num_from(jr.at("mean_width"));
        row.width_se = num_from(jr.at("width_se"));
        for (const auto& [k, v] : jr.at("extra").items()) row.extra[k] = num_from(v);
        if (jr.contains("sets")) row.sets = jr.at("sets").get<std::vector<std::vector<double>>>();
        r.rows.push_back(std::move(row));
    }
    return r;
}

std::string report_to_csv(const StudyReport& report)
{
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& r : report.rows) {
        std::string extra;
        for (const auto& [k, v] : r.extra) {
            if (!extra.empty()) extra += ';';
            extra += k + '=' + fmt_g(v);
        }
        out << report.study << ',' << r.scenario << ',' << r.reps << ',' << fmt_g(r.coverage) << ','
            << fmt_g(r.coverage_se) << ',' << fmt_g(r.mean_width) << ',' << fmt_g(r.width_se) << ',' << extra
            << '\n';
    }
    return out.str();
}

void write_report(const StudyReport& report, const std::string& path, ReportFormat format)
{
    const std::string text = format == ReportFormat::csv ? report_to_csv(report) : report_to_json(report).dump(2) + "\n";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace reprosamp::harness
