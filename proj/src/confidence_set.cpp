#include "reprosamp/confidence_set.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reprosamp {

bool Interval::empty() const
{
    if (lo > hi) return true;
    if (lo == hi) return !(lo_closed && hi_closed);
    return false;
}

bool Interval::contains(double x) const
{
    if (x < lo || x > hi) return false;
    if (x == lo && !lo_closed) return false;
    if (x == hi && !hi_closed) return false;
    return true;
}

double Interval::length() const
{
    return empty() ? 0.0 : hi - lo;
}

namespace {

bool touches(const Interval& a, const Interval& b)
{
    // a starts no later than b
    if (b.lo < a.hi) return true;
    if (b.lo == a.hi) return a.hi_closed || b.lo_closed;
    return false;
}

}  // namespace

RealUnion::RealUnion(std::vector<Interval> parts)
{
    std::erase_if(parts, [](const Interval& i) { return i.empty(); });
    std::sort(parts.begin(), parts.end(), [](const Interval& a, const Interval& b) {
        if (a.lo != b.lo) return a.lo < b.lo;
        return a.lo_closed && !b.lo_closed;
    });
    for (const Interval& p : parts) {
        if (!parts_.empty() && touches(parts_.back(), p)) {
            Interval& last = parts_.back();
            if (p.hi > last.hi) {
                last.hi = p.hi;
                last.hi_closed = p.hi_closed;
            } else if (p.hi == last.hi) {
                last.hi_closed = last.hi_closed || p.hi_closed;
            }
        } else {
            parts_.push_back(p);
        }
    }
}

bool RealUnion::contains(double x) const
{
    return std::any_of(parts_.begin(), parts_.end(), [x](const Interval& i) { return i.contains(x); });
}

double RealUnion::length() const
{
    double total = 0.0;
    for (const Interval& i : parts_) total += i.length();
    return total;
}

double RealUnion::lower() const
{
    if (parts_.empty()) throw std::logic_error("empty set has no lower bound");
    return parts_.front().lo;
}

double RealUnion::upper() const
{
    if (parts_.empty()) throw std::logic_error("empty set has no upper bound");
    return parts_.back().hi;
}

DiscreteSet::DiscreteSet(std::vector<ParamValue> values) : values_(std::move(values))
{
    std::sort(values_.begin(), values_.end());
    values_.erase(std::unique(values_.begin(), values_.end()), values_.end());
}

bool DiscreteSet::contains(const ParamValue& v) const
{
    return std::binary_search(values_.begin(), values_.end(), v);
}

bool ProductSet::empty() const
{
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.second.empty(); });
}

const RealUnion* ProductSet::find(const ParamValue& discrete) const
{
    for (const auto& [key, u] : entries)
        if (key == discrete) return &u;
    return nullptr;
}

bool ProductSet::contains(const ParamValue& discrete, double x) const
{
    const RealUnion* u = find(discrete);
    return u != nullptr && u->contains(x);
}

std::string ConfidenceSet::kind() const
{
    switch (content.index()) {
    case 0: return "real_union";
    case 1: return "discrete";
    default: return "product";
    }
}

bool ConfidenceSet::empty() const
{
    return std::visit([](const auto& c) { return c.empty(); }, content);
}

const RealUnion& ConfidenceSet::real_union() const
{
    if (const auto* u = std::get_if<RealUnion>(&content)) return *u;
    throw std::logic_error("confidence set is not a real union");
}

const DiscreteSet& ConfidenceSet::discrete() const
{
    if (const auto* d = std::get_if<DiscreteSet>(&content)) return *d;
    throw std::logic_error("confidence set is not discrete");
}

const ProductSet& ConfidenceSet::product() const
{
    if (const auto* p = std::get_if<ProductSet>(&content)) return *p;
    throw std::logic_error("confidence set is not a product set");
}

void ConfidenceSet::warn(std::string message)
{
    if (!has_warning(message)) meta.warnings.push_back(std::move(message));
}

bool ConfidenceSet::has_warning(const std::string& message) const
{
    return std::find(meta.warnings.begin(), meta.warnings.end(), message) != meta.warnings.end();
}

ConfidenceSet make_real_set(double level, RealUnion u, SetMeta meta)
{
    ConfidenceSet set{level, std::move(u), std::move(meta)};
    if (set.empty()) set.warn("empty confidence set");
    return set;
}

namespace {

nlohmann::json bound(double x)
{
    if (std::isinf(x)) return nullptr;
    return x;
}

double read_bound(const nlohmann::json& j, double sentinel)
{
    return j.is_null() ? sentinel : j.get<double>();
}

nlohmann::json union_json(const RealUnion& u)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const Interval& i : u.intervals())
        arr.push_back({{"lo", bound(i.lo)}, {"hi", bound(i.hi)},
                       {"lo_closed", i.lo_closed}, {"hi_closed", i.hi_closed}});
    return arr;
}

RealUnion union_from(const nlohmann::json& arr)
{
    std::vector<Interval> parts;
    for (const auto& e : arr)
        parts.push_back({read_bound(e.at("lo"), -kInf), read_bound(e.at("hi"), kInf),
                         e.at("lo_closed").get<bool>(), e.at("hi_closed").get<bool>()});
    return RealUnion(std::move(parts));
}

nlohmann::json param_json(const ParamValue& v)
{
    if (v.size() == 1) return v[0];
    return v;
}

ParamValue param_from(const nlohmann::json& j)
{
    if (j.is_number()) return {j.get<double>()};
    return j.get<std::vector<double>>();
}

}  // namespace

nlohmann::json to_json(const ConfidenceSet& set)
{
    nlohmann::json j;
    j["level"] = set.level;
    j["kind"] = set.kind();
    if (const auto* u = std::get_if<RealUnion>(&set.content)) {
        j["intervals"] = union_json(*u);
    } else if (const auto* d = std::get_if<DiscreteSet>(&set.content)) {
        nlohmann::json vals = nlohmann::json::array();
        for (const auto& v : d->values()) vals.push_back(param_json(v));
        j["values"] = vals;
    } else {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& [key, u] : set.product().entries)
            entries.push_back({{"value", param_json(key)}, {"intervals", union_json(u)}});
        j["entries"] = entries;
    }
    j["meta"] = {{"seed", set.meta.seed},
                 {"n_mc", set.meta.n_mc},
                 {"grid_step", set.meta.grid_step},
                 {"warnings", set.meta.warnings}};
    return j;
}

ConfidenceSet confidence_set_from_json(const nlohmann::json& j)
{
    ConfidenceSet set;
    set.level = j.at("level").get<double>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "real_union") {
        set.content = union_from(j.at("intervals"));
    } else if (kind == "discrete") {
        std::vector<ParamValue> vals;
        for (const auto& v : j.at("values")) vals.push_back(param_from(v));
        set.content = DiscreteSet(std::move(vals));
    } else if (kind == "product") {
        ProductSet p;
        for (const auto& e : j.at("entries"))
            p.entries.emplace_back(param_from(e.at("value")), union_from(e.at("intervals")));
        set.content = std::move(p);
    } else {
        throw std::invalid_argument("unknown confidence set kind: " + kind);
    }
    const auto& m = j.at("meta");
    set.meta.seed = m.at("seed").get<std::uint64_t>();
    set.meta.n_mc = m.at("n_mc").get<std::size_t>();
    set.meta.grid_step = m.at("grid_step").get<double>();
    set.meta.warnings = m.at("warnings").get<std::vector<std::string>>();
    return set;
}

}  // namespace reprosamp
