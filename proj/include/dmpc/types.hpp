#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Thrown when a configuration or precondition is not met.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when numerical integration produces non-finite values.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box {v : lower <= v <= upper}; infinite entries are unbounded.
struct Box {
  Vec lower;
  Vec upper;

  static Box unbounded(int dim) {
    return {Vec::Constant(dim, -kInf), Vec::Constant(dim, kInf)};
  }

  [[nodiscard]] int dim() const { return static_cast<int>(lower.size()); }

  [[nodiscard]] bool nonempty() const {
    return lower.size() == upper.size() && (lower.array() <= upper.array()).all();
  }

  [[nodiscard]] bool contains(const Vec& v, double tol = 0.0) const {
    return v.size() == lower.size() && (v.array() >= lower.array() - tol).all() &&
           (v.array() <= upper.array() + tol).all();
  }

  /// Largest amount by which v leaves the box (0 when inside).
  [[nodiscard]] double violation(const Vec& v) const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      worst = std::max({worst, lower[i] - v[i], v[i] - upper[i]});
    }
    return worst;
  }
};

inline Vec3 position_of(const Vec& state) { return state.head<3>(); }

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace dmpc
