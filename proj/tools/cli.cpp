#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "reprosamp/binomial.hpp"
#include "reprosamp/harness.hpp"
#include "reprosamp/mixture.hpp"
#include "reprosamp/neyman.hpp"
#include "reprosamp/quantile.hpp"
#include "reprosamp/rng.hpp"

namespace reprosamp::cli {

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_cells(const std::string& line)
{
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_number(const std::string& text, double& out)
{
    if (text.empty()) return false;
    char* end = nullptr;
    out = std::strtod(text.c_str(), &end);
    return end == text.c_str() + text.size();
}

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

CLI::Validator open_unit()
{
    return CLI::Validator(
        [](std::string& s) -> std::string {
            double v = 0;
            if (!parse_number(s, v) || !std::isfinite(v) || !(v > 0.0 && v < 1.0))
                return "value " + s + " must be a number in (0, 1)";
            return {};
        },
        "in (0,1)");
}

CLI::Validator positive_real()
{
    return CLI::Validator(
        [](std::string& s) -> std::string {
            double v = 0;
            if (!parse_number(s, v) || !std::isfinite(v) || !(v > 0.0)) return "value " + s + " must be positive";
            return {};
        },
        "positive");
}

struct Options {
    std::uint64_t seed = 1;
    std::string out_path;
    std::string log_path;
    std::size_t workers = 0;

    int y = 0;
    int r = 0;
    double alpha = 0.95;
    std::string method;
    double grid_step = 0.0005;

    std::string data;
    std::string column;
    std::string flags;
    double zeta = 0.5;

    double lambda = 1.0;
    std::size_t tau_max = 10;
    std::size_t candidates = 200;
    std::size_t mc = 1000;
    std::size_t fit_budget = 5;
    std::size_t n_sim = 5000;

    std::string study;
    std::string config;
    std::string format = "json";
    bool paper_scale = false;
};

std::optional<std::string> column_arg(const Options& o)
{
    if (o.column.empty()) return std::nullopt;
    return o.column;
}

std::size_t resolve_workers(const Options& o)
{
    if (o.workers > 0) return o.workers;
    if (const char* env = std::getenv("REPROSAMP_WORKERS"); env && *env) {
        double v = 0;
        if (!parse_number(env, v) || v < 1 || v != std::floor(v) || v > 4096)
            throw UsageError(std::string("REPROSAMP_WORKERS must be a positive integer, got '") + env + "'");
        return static_cast<std::size_t>(v);
    }
    return 1;
}

nlohmann::json run_binomial(const Options& o)
{
    if (o.y > o.r) throw UsageError("--y must not exceed --r");
    ConfidenceSet set = o.method == "wald" ? binomial::wald_interval(o.y, o.r, o.alpha)
                                           : binomial::binomial_repro_set(o.y, o.r, o.alpha, o.grid_step);
    set.meta.seed = o.seed;
    return to_json(set);
}

nlohmann::json run_quantile(const Options& o)
{
    const auto d = load_dataset(o.data, column_arg(o));
    auto set = quantile::quantile_ci(quantile::OrderedSample(d.values), o.zeta, o.alpha);
    set.meta.seed = o.seed;
    return to_json(set);
}

nlohmann::json run_robust(const Options& o)
{
    const auto d = load_dataset(o.data, column_arg(o));
    std::vector<bool> flags(d.n, false);
    if (!o.flags.empty()) {
        const auto f = load_dataset(o.flags);
        if (f.n != d.n) throw DataError("flag file has " + std::to_string(f.n) + " rows, data has " + std::to_string(d.n));
        for (std::size_t i = 0; i < f.n; ++i) {
            if (f.values[i] != 0.0 && f.values[i] != 1.0)
                throw DataError("flag values must be 0 or 1 (row " + std::to_string(i + 1) + ")");
            flags[i] = f.values[i] == 1.0;
        }
    }
    const double delta = quantile::estimate_delta(d.values, flags);
    auto location = quantile::robust_location_ci(d.values, o.alpha, delta);
    location.meta.seed = o.seed;
    nlohmann::json result{{"delta_hat", delta}, {"location", to_json(location)}};
    if (d.n >= 2) {
        const auto calib = quantile::calibrate_mad(d.n, o.alpha, o.n_sim, RngStream(o.seed, 0));
        auto scale = quantile::robust_scale_ci(d.values, o.alpha, calib);
        scale.meta.seed = o.seed;
        scale.meta.n_mc = o.n_sim;
        result["scale"] = to_json(scale);
        result["mad_calibration"] = {{"psi_inv_half", calib.psi_inv_half},
                                     {"a_lower", calib.a_lower},
                                     {"a_upper", calib.a_upper}};
    }
    return result;
}

nlohmann::json run_mixture(const Options& o)
{
    const auto d = load_dataset(o.data, column_arg(o));
    if (d.n <= 2 * o.tau_max)
        throw UsageError("mixture-tau-ci needs more than 2 * tau-max observations (n = " + std::to_string(d.n) + ")");
    const RngStream root(o.seed, 0);
    const auto cands = mixture::candidate_set(d.values, o.candidates, o.lambda, o.tau_max, o.fit_budget, root.derive(1));
    const auto tau = mixture::tau_confidence_detail(d.values, cands, o.alpha, o.mc, o.tau_max, root.derive(2),
                                                    {o.fit_budget, true});
    quantile::MadCalibrationCache cache(o.alpha, o.n_sim, root.derive(3));
    const auto ms = mixture::mu_sigma_confidence_sets(d.values, cands, o.alpha, cache);

    auto tau_set = tau.set;
    tau_set.meta.seed = o.seed;
    nlohmann::json by_tau = nlohmann::json::object();
    for (const auto& e : cands.entries) {
        auto& slot = by_tau[std::to_string(e.tau)];
        if (slot.is_null()) slot = {{"entries", 0}, {"multiplicity", 0}};
        slot["entries"] = slot["entries"].get<std::size_t>() + 1;
        slot["multiplicity"] = slot["multiplicity"].get<std::size_t>() + e.multiplicity;
    }
    nlohmann::json min_stat = nlohmann::json::object();
    for (const auto& [t, v] : tau.min_statistic) min_stat[std::to_string(t)] = v;
    nlohmann::json comps = nlohmann::json::array();
    for (std::size_t k = 0; k < ms.mu.size(); ++k)
        comps.push_back({{"component", k + 1}, {"mu", to_json(ms.mu[k])}, {"sigma", to_json(ms.sigma[k])}});
    return {{"tau_set", to_json(tau_set)},
            {"candidate_summary",
             {{"n_candidates", o.candidates},
              {"distinct_entries", cands.entries.size()},
              {"by_tau", by_tau},
              {"tau_hat_obs", tau.tau_hat_obs},
              {"min_statistic", min_stat},
              {"warnings", cands.warnings}}},
            {"per_component_mu_sigma_sets", comps}};
}

nlohmann::json run_uniform(const Options& o)
{
    const auto d = load_dataset(o.data, column_arg(o));
    const auto s = neyman::UniformLocationSample::from(d.values);
    ConfidenceSet set;
    if (o.method == "mean-test")
        set = neyman::uniform_mean_test_ci(s, o.alpha);
    else if (o.method == "lrt")
        set = neyman::uniform_lrt_ci(s, o.alpha);
    else if (o.method == "orderstat") {
        if (s.n < 2) throw UsageError("orderstat needs at least 2 observations");
        set = neyman::uniform_orderstat_ci(s, o.alpha);
    } else
        set = neyman::uniform_mean_repro_ci(s, o.alpha);
    set.meta.seed = o.seed;
    return to_json(set);
}

nlohmann::json run_bernoulli(const Options& o)
{
    const auto rep = neyman::bernoulli_single_obs_ci(o.y, o.alpha);
    return {{"closed_form", to_json(rep.closed_form)},
            {"literal", to_json(rep.literal)},
            {"discrepancy", rep.discrepancy}};
}

std::string run_simulate(const Options& o, bool seed_given, nlohmann::json& config_out)
{
    const auto study = harness::parse_study(o.study);
    harness::StudyConfig cfg;
    cfg.study = study;
    if (!o.config.empty()) cfg = harness::load_config(o.config, study);
    if (seed_given) cfg.seed = o.seed;
    cfg.workers = resolve_workers(o);
    if (o.paper_scale) cfg.paper_scale = true;
    harness::validate(cfg);
    config_out["study_params"] = cfg.params;
    config_out["reps"] = harness::default_reps(cfg);
    config_out["paper_scale"] = cfg.paper_scale;
    config_out["seed"] = cfg.seed;
    const auto report = harness::run_study(cfg);
    return harness::parse_format(o.format) == harness::ReportFormat::csv ? harness::report_to_csv(report)
                                                                         : harness::report_to_json(report).dump(2) + "\n";
}

std::string join_args(const std::vector<std::string>& args)
{
    std::string s = "reprosamp";
    for (const auto& a : args) s += " " + a;
    return s;
}

}  // namespace

Dataset parse_dataset(std::istream& in, const std::string& source, const std::optional<std::string>& column)
{
    std::vector<std::pair<std::size_t, std::string>> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.emplace_back(line_no, line);
    }
    while (!lines.empty() && trim(lines.back().second).empty()) lines.pop_back();
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first].second).empty()) ++first;
    if (first == lines.size()) throw DataError(source + ": empty file");

    Dataset d;
    d.source = source;
    const auto head = split_cells(lines[first].second);
    bool header = false;
    for (const auto& c : head) {
        double v = 0;
        if (!parse_number(c, v)) header = true;
    }

    std::size_t col = 0;
    if (column) {
        bool found = false;
        if (header)
            for (std::size_t c = 0; c < head.size(); ++c)
                if (head[c] == *column) {
                    col = c;
                    found = true;
                }
        if (!found) {
            double v = 0;
            if (!parse_number(*column, v) || v < 0 || v != std::floor(v))
                throw DataError(source + ": no column named '" + *column + "'");
            col = static_cast<std::size_t>(v);
        }
    }
    if (header) {
        if (col >= head.size()) throw DataError(source + ": column " + std::to_string(col) + " out of range");
        d.column_name = head[col];
        ++first;
    }

    for (std::size_t i = first; i < lines.size(); ++i) {
        const auto& [no, text] = lines[i];
        if (trim(text).empty()) throw DataError(source + ": blank line at line " + std::to_string(no));
        const auto cells = split_cells(text);
        if (col >= cells.size())
            throw DataError(source + ": line " + std::to_string(no) + " has no column " + std::to_string(col));
        double v = 0;
        if (!parse_number(cells[col], v) || !std::isfinite(v))
            throw DataError(source + ": non-numeric value '" + cells[col] + "' at line " + std::to_string(no) +
                            ", column " + std::to_string(col));
        d.values.push_back(v);
    }
    if (d.values.empty()) throw DataError(source + ": no data rows");
    d.n = d.values.size();
    return d;
}

Dataset load_dataset(const std::string& path, const std::optional<std::string>& column)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path + "'");
    return parse_dataset(in, path, column);
}

nlohmann::json RunRecord::to_json() const
{
    return {{"command_line", command_line}, {"config", config}, {"seed", seed},
            {"version", version},           {"timestamp", timestamp}, {"digest", digest}};
}

std::string sha256_hex(const std::string& data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream ss;
    for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return ss.str();
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Options o;
    CLI::App app{"Repro samples confidence sets", "reprosamp"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    auto* seed_opt = app.add_option("--seed", o.seed, "Random seed");
    app.add_option("--out", o.out_path, "Write the result here instead of stdout");
    app.add_option("--log", o.log_path, "Append a run record (JSON line) to this file");
    app.add_option("--workers", o.workers, "Worker threads (default: REPROSAMP_WORKERS or 1)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{4096}));

    auto* bin = app.add_subcommand("binomial-ci", "Binomial repro or Wald interval");
    bin->add_option("--y", o.y, "Observed successes")->required()->check(CLI::NonNegativeNumber);
    bin->add_option("--r", o.r, "Number of trials")->required()->check(CLI::Range(1, 100000));
    bin->add_option("--alpha", o.alpha, "Confidence level")->check(open_unit());
    bin->add_option("--method", o.method, "repro|wald")->check(CLI::IsMember({"repro", "wald"}));
    bin->add_option("--grid-step", o.grid_step, "Theta grid step")->check(open_unit());

    auto* qci = app.add_subcommand("quantile-ci", "Order-statistic interval for a quantile");
    qci->add_option("--data", o.data, "CSV file")->required();
    qci->add_option("--column", o.column, "Column name or 0-based index");
    qci->add_option("--zeta", o.zeta, "Quantile level")->required()->check(open_unit());
    qci->add_option("--alpha", o.alpha, "Confidence level")->check(open_unit());

    auto* rob = app.add_subcommand("robust-ci", "Robust location and scale intervals");
    rob->add_option("--data", o.data, "CSV file")->required();
    rob->add_option("--column", o.column, "Column name or 0-based index");
    rob->add_option("--alpha", o.alpha, "Confidence level")->check(open_unit());
    rob->add_option("--flags", o.flags, "CSV of 0/1 overlap flags, one per row");
    rob->add_option("--n-sim", o.n_sim, "MAD calibration draws")->check(CLI::Range(std::size_t{1000}, std::size_t{10000000}));

    auto* mix = app.add_subcommand("mixture-tau-ci", "Confidence set for the number of mixture components");
    mix->add_option("--data", o.data, "CSV file")->required();
    mix->add_option("--column", o.column, "Column name or 0-based index");
    mix->add_option("--alpha", o.alpha, "Confidence level")->check(open_unit());
    mix->add_option("--lambda", o.lambda, "Modified BIC penalty weight")->check(positive_real());
    mix->add_option("--tau-max", o.tau_max, "Largest tau searched")->check(CLI::Range(std::size_t{1}, std::size_t{50}));
    mix->add_option("--candidates", o.candidates, "Simulated noise draws for the candidate set")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    mix->add_option("--mc", o.mc, "Monte-Carlo draws per nuclear statistic")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
    mix->add_option("--fit-budget", o.fit_budget, "EM restarts")->check(CLI::Range(std::size_t{1}, std::size_t{1000}));
    mix->add_option("--n-sim", o.n_sim, "MAD calibration draws")->check(CLI::Range(std::size_t{1000}, std::size_t{10000000}));

    auto* uni = app.add_subcommand("uniform-ci", "Uniform location intervals");
    uni->add_option("--data", o.data, "CSV file")->required();
    uni->add_option("--column", o.column, "Column name or 0-based index");
    uni->add_option("--alpha", o.alpha, "Confidence level")->check(open_unit());
    uni->add_option("--method", o.method, "repro|mean-test|lrt|orderstat")
        ->check(CLI::IsMember({"repro", "mean-test", "lrt", "orderstat"}));

    auto* ber = app.add_subcommand("bernoulli-one", "Single-observation Bernoulli set");
    ber->add_option("--y", o.y, "Observation (0 or 1)")->required()->check(CLI::IsMember({0, 1}));
    ber->add_option("--alpha", o.alpha, "Confidence level")->check(open_unit());

    auto* sim = app.add_subcommand("simulate", "Run a replication study");
    sim->add_option("--study", o.study, "Study name")->required()->check(
        CLI::IsMember({"binomial_table1", "uniform_example", "lrt_compare", "quantile_figB1", "mixture_tau",
                       "mixture_musigma"}));
    sim->add_option("--config", o.config, "key=value config file");
    sim->add_option("--format", o.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    sim->add_flag("--paper-scale", o.paper_scale, "Use full paper-scale replication counts");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\nrun 'reprosamp --help' for usage\n";
        return 2;
    }

    const auto* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    nlohmann::json config{{"subcommand", name}};
    for (const auto* opt : chosen->get_options())
        if (opt->count() > 0 && opt->get_name() != "--help") config[opt->get_name()] = opt->as<std::string>();

    std::string text;
    try {
        if (name == "simulate") {
            text = run_simulate(o, seed_opt->count() > 0, config);
        } else {
            resolve_workers(o);
            nlohmann::json result;
            if (name == "binomial-ci") result = run_binomial(o);
            else if (name == "quantile-ci") result = run_quantile(o);
            else if (name == "robust-ci") result = run_robust(o);
            else if (name == "mixture-tau-ci") result = run_mixture(o);
            else if (name == "uniform-ci") result = run_uniform(o);
            else result = run_bernoulli(o);
            text = result.dump(2) + "\n";
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const harness::StudyError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (o.out_path.empty()) {
            out << text;
        } else {
            std::ofstream f(o.out_path, std::ios::binary);
            if (!f) throw std::runtime_error("cannot open '" + o.out_path + "' for writing");
            f << text;
            if (!f.flush()) throw std::runtime_error("write to '" + o.out_path + "' failed");
        }
        if (!o.log_path.empty()) {
            RunRecord rec;
            rec.command_line = join_args(args);
            rec.config = config;
            rec.seed = o.seed;
            rec.timestamp = utc_timestamp();
            rec.digest = sha256_hex(text);
            std::ofstream log(o.log_path, std::ios::app);
            if (!log) throw std::runtime_error("cannot open log '" + o.log_path + "'");
            log << rec.to_json().dump() << "\n";
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace reprosamp::cli
