#pragma once

#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace reprosamp {

using Vector = std::vector<double>;

enum class IntervalMode { equal_tail, shortest };

// Mahalanobis depth 1 / (1 + (t - mu)' S^-1 (t - mu)) with a trace-scaled ridge on S.
class MahalanobisDepth {
public:
    MahalanobisDepth() = default;
    explicit MahalanobisDepth(std::span<const Vector> points);

    std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
    double operator()(std::span<const double> t) const;
    bool point_mass() const { return point_mass_; }

private:
    Eigen::VectorXd mean_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    bool point_mass_ = false;
};

struct BorelInterval {
    double lo = 0.0;
    double hi = 0.0;
};

struct DepthRegion {
    std::vector<Vector> reference_points;
    double depth_threshold = 0.0;
    MahalanobisDepth depth;
};

struct BorelRegion {
    double level = 0.95;
    std::variant<BorelInterval, DepthRegion> kind;

    std::size_t dim() const;
};

// Number of samples a level-alpha region must hold: ceil(alpha * n).
std::size_t required_count(double alpha, std::size_t n);

BorelRegion borel_interval_from_samples(std::span<const double> values, double alpha,
                                        IntervalMode mode = IntervalMode::equal_tail);

BorelRegion depth_central_region(std::span<const Vector> points, double alpha);

bool contains(const BorelRegion& region, std::span<const double> t);

}  // namespace reprosamp
