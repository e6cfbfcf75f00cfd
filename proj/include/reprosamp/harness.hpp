#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace reprosamp::harness {

enum class Study { binomial_table1, uniform_example, lrt_compare, quantile_figB1, mixture_tau, mixture_musigma };

const char* to_string(Study s);
Study parse_study(const std::string& name);

class StudyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StudyConfig {
    Study study = Study::binomial_table1;
    std::size_t reps = 0;  // 0: study default
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    bool paper_scale = false;
    std::map<std::string, std::string> params;

    double get_double(const std::string& key, double fallback) const;
    std::size_t get_count(const std::string& key, std::size_t fallback) const;
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_names(const std::string& key, const std::vector<std::string>& fallback) const;
};

// Flat key=value text; '#' starts a comment. The keys study, reps, seed,
// workers and paper_scale fill the typed fields, everything else goes to params.
StudyConfig parse_config(std::istream& in, std::optional<Study> study = std::nullopt);
StudyConfig load_config(const std::string& path, std::optional<Study> study = std::nullopt);

// Throws StudyError naming the first unknown key or invalid value.
void validate(const StudyConfig& config);

std::size_t default_reps(const StudyConfig& config);

struct ScenarioRow {
    std::string scenario;
    std::size_t reps = 0;
    double coverage = 0.0;
    double coverage_se = 0.0;
    double mean_width = 0.0;
    double width_se = 0.0;
    std::map<std::string, double> extra;
    // Per-replication discrete sets (mixture_tau only).
    std::vector<std::vector<double>> sets;

    bool operator==(const ScenarioRow&) const = default;
};

struct StudyReport {
    std::string study;
    std::uint64_t seed = 0;
    std::size_t reps = 0;
    std::size_t failures = 0;
    std::vector<std::string> failure_log;
    std::vector<ScenarioRow> rows;

    const ScenarioRow& row(const std::string& scenario) const;
    bool operator==(const StudyReport&) const = default;
};

StudyReport run_study(const StudyConfig& config);

// Fills coverage, coverage_se, mean_width and width_se from per-replication outcomes.
// Non-finite widths are left out of the mean and counted in extra["infinite_widths"].
void aggregate(ScenarioRow& row, const std::vector<int>& covered, const std::vector<double>& widths);

using SetHistogram = std::map<std::vector<double>, std::size_t>;

SetHistogram tau_set_histogram(const std::vector<StudyReport>& reports);

struct PairedComparison {
    std::size_t n = 0;
    std::size_t reps = 0;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double mean_diff = 0.0;
    double diff_se = 0.0;
    double frac_a_shorter = 0.0;
};

PairedComparison paired_width_comparison(std::size_t n, const std::vector<double>& width_a,
                                         const std::vector<double>& width_b);

// Orderstat (a) against LRT (b) widths on shared samples, one entry per n.
std::vector<PairedComparison> lrt_width_comparison(const StudyConfig& config);

enum class ReportFormat { csv, json };

ReportFormat parse_format(const std::string& name);

extern const char* const kCsvHeader;

nlohmann::json report_to_json(const StudyReport& report);
StudyReport report_from_json(const nlohmann::json& j);
std::string report_to_csv(const StudyReport& report);
void write_report(const StudyReport& report, const std::string& path, ReportFormat format);

}  // namespace reprosamp::harness
