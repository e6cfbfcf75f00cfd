#include "reprosamp/borel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace reprosamp {

namespace {

void check_level(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("invalid level");
}

}  // namespace

std::size_t required_count(double alpha, std::size_t n)
{
    const double raw = alpha * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
    return std::clamp<std::size_t>(k, 1, n);
}

MahalanobisDepth::MahalanobisDepth(std::span<const Vector> points)
{
    if (points.empty()) throw std::invalid_argument("no samples");
    const auto q = static_cast<Eigen::Index>(points.front().size());
    if (q == 0) throw std::invalid_argument("zero-dimensional points");
    const auto n = static_cast<double>(points.size());

    mean_ = Eigen::VectorXd::Zero(q);
    for (const Vector& p : points) {
        if (static_cast<Eigen::Index>(p.size()) != q) throw std::invalid_argument("dimension mismatch");
        for (Eigen::Index i = 0; i < q; ++i) {
            if (!std::isfinite(p[i])) throw std::domain_error("degenerate point cloud");
            mean_[i] += p[i];
        }
    }
    mean_ /= n;

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd d(q);
    for (const Vector& p : points) {
        for (Eigen::Index i = 0; i < q; ++i) d[i] = p[i] - mean_[i];
        cov.noalias() += d * d.transpose();
    }
    if (points.size() > 1) cov /= (n - 1.0);

    const double trace = cov.trace();
    if (trace == 0.0) {
        point_mass_ = true;
        return;
    }
    cov.diagonal().array() += 1e-8 * trace / static_cast<double>(q);
    chol_.compute(cov);
    if (chol_.info() != Eigen::Success) throw std::domain_error("degenerate point cloud");
}

double MahalanobisDepth::operator()(std::span<const double> t) const
{
    if (static_cast<Eigen::Index>(t.size()) != mean_.size()) throw std::invalid_argument("dimension mismatch");
    Eigen::VectorXd d(mean_.size());
    for (Eigen::Index i = 0; i < mean_.size(); ++i) d[i] = t[i] - mean_[i];
    if (point_mass_) return d.isZero(0.0) ? 1.0 : 0.0;
    const double m2 = d.dot(chol_.solve(d));
    return 1.0 / (1.0 + m2);
}

std::size_t BorelRegion::dim() const
{
    if (std::holds_alternative<BorelInterval>(kind)) return 1;
    return std::get<DepthRegion>(kind).depth.dim();
}

BorelRegion borel_interval_from_samples(std::span<const double> values, double alpha, IntervalMode mode)
{
    if (values.empty()) throw std::invalid_argument("no samples");
    check_level(alpha);
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const std::size_t k = required_count(alpha, n);

    std::size_t lo = 0;
    if (mode == IntervalMode::equal_tail) {
        lo = (n - k) / 2;
    } else {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + k <= n; ++i) {
            const double w = v[i + k - 1] - v[i];
            if (w < best) {
                best = w;
                lo = i;
            }
        }
    }
    return BorelRegion{alpha, BorelInterval{v[lo], v[lo + k - 1]}};
}

BorelRegion depth_central_region(std::span<const Vector> points, double alpha)
{
    check_level(alpha);
    if (points.empty()) throw std::invalid_argument("no samples");
    const std::size_t q = points.front().size();
    if (points.size() < q + 2) throw std::invalid_argument("depth region needs at least q+2 points");

    DepthRegion region;
    region.reference_points.assign(points.begin(), points.end());
    region.depth = MahalanobisDepth(points);

    std::vector<double> depths;
    depths.reserve(points.size());
    for (const Vector& p : points) depths.push_back(region.depth(p));
    std::sort(depths.begin(), depths.end());

    // keep every t whose depth is at least the ceil((1-alpha) N)-th smallest reference depth
    const std::size_t n = depths.size();
    const double raw = (1.0 - alpha) * static_cast<double>(n);
    auto idx = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
    idx = std::clamp<std::size_t>(idx, 1, n);
    region.depth_threshold = depths[idx - 1];
    return BorelRegion{alpha, std::move(region)};
}

bool contains(const BorelRegion& region, std::span<const double> t)
{
    if (t.size() != region.dim()) throw std::invalid_argument("dimension mismatch");
    if (const auto* iv = std::get_if<BorelInterval>(&region.kind)) return iv->lo <= t[0] && t[0] <= iv->hi;
    const auto& dr = std::get<DepthRegion>(region.kind);
    return dr.depth(t) >= dr.depth_threshold;
}

}  // namespace reprosamp
