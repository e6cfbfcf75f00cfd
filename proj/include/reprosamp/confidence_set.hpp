#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace reprosamp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using ParamValue = std::vector<double>;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_closed = true;
    bool hi_closed = true;

    static Interval closed(double lo, double hi) { return {lo, hi, true, true}; }
    static Interval open(double lo, double hi) { return {lo, hi, false, false}; }

    bool empty() const;
    bool contains(double x) const;
    double length() const;
    bool operator==(const Interval&) const = default;
};

// Sorted, pairwise-disjoint intervals.
class RealUnion {
public:
    RealUnion() = default;
    explicit RealUnion(std::vector<Interval> parts);

    const std::vector<Interval>& intervals() const { return parts_; }
    bool empty() const { return parts_.empty(); }
    bool contains(double x) const;
    double length() const;
    double lower() const;
    double upper() const;
    bool operator==(const RealUnion&) const = default;

private:
    std::vector<Interval> parts_;
};

class DiscreteSet {
public:
    DiscreteSet() = default;
    explicit DiscreteSet(std::vector<ParamValue> values);

    const std::vector<ParamValue>& values() const { return values_; }
    bool empty() const { return values_.empty(); }
    bool contains(const ParamValue& v) const;
    std::size_t size() const { return values_.size(); }
    bool operator==(const DiscreteSet&) const = default;

private:
    std::vector<ParamValue> values_;
};

struct ProductSet {
    std::vector<std::pair<ParamValue, RealUnion>> entries;

    bool empty() const;
    bool contains(const ParamValue& discrete, double x) const;
    const RealUnion* find(const ParamValue& discrete) const;
    bool operator==(const ProductSet&) const = default;
};

struct SetMeta {
    std::uint64_t seed = 0;
    std::size_t n_mc = 0;
    double grid_step = 0.0;
    std::vector<std::string> warnings;
    bool operator==(const SetMeta&) const = default;
};

struct ConfidenceSet {
    double level = 0.95;
    std::variant<RealUnion, DiscreteSet, ProductSet> content;
    SetMeta meta;

    std::string kind() const;
    bool empty() const;
    const RealUnion& real_union() const;
    const DiscreteSet& discrete() const;
    const ProductSet& product() const;
    void warn(std::string message);
    bool has_warning(const std::string& message) const;
    bool operator==(const ConfidenceSet&) const = default;
};

ConfidenceSet make_real_set(double level, RealUnion u, SetMeta meta = {});

nlohmann::json to_json(const ConfidenceSet& set);
ConfidenceSet confidence_set_from_json(const nlohmann::json& j);

}  // namespace reprosamp
