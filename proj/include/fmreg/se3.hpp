#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace fmreg {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Thrown when log() is requested for a rotation whose angle is within
/// 1e-6 of pi. The map is ill-conditioned there; callers reject the sample.
class AngleNearPi : public std::runtime_error {
 public:
  AngleNearPi() : std::runtime_error("se3 log undefined: rotation angle too close to pi") {}
};

/**
 * Element of the se(3) tangent space.
 *
 * Stacking convention is fixed as (linear, angular) = (v, w):
 * indices 0..2 are the translational part in meters, 3..5 the
 * rotational part in radians. Every Jacobian and solver in this
 * library assumes this ordering.
 */
struct Twist {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();

  Twist() = default;
  Twist(const Eigen::Vector3d& v, const Eigen::Vector3d& w) : linear(v), angular(w) {}
  explicit Twist(const Vector6d& x) : linear(x.head<3>()), angular(x.tail<3>()) {}

  Vector6d coeffs() const {
    Vector6d x;
    x << linear, angular;
    return x;
  }
};

/**
 * Rigid transform in SE(3), stored as an orthonormal rotation matrix
 * plus a translation vector.
 *
 * Naming convention throughout the library: a pose T_{a,b} maps points
 * expressed in frame b into frame a, i.e. p_a = T_{a,b} * p_b.
 * Composition follows matrix order: T_{a,c} = T_{a,b} * T_{b,c}.
 */
class SE3 {
 public:
  SE3() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  SE3(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static SE3 identity() { return SE3(); }

  /// Exponential map. Rodrigues rotation plus left-Jacobian-integrated
  /// translation; the small-angle branch switches to 2nd-order Taylor
  /// coefficients below ||w|| = 1e-8.
  static SE3 exp(const Twist& xi);

  /// From a 4x4 homogeneous matrix (no validation; see is_valid()).
  static SE3 from_matrix(const Eigen::Matrix4d& m) {
    return SE3(m.block<3, 3>(0, 0), m.block<3, 1>(0, 3));
  }

  /// Logarithm map. Throws AngleNearPi if rotation_angle() >= pi - 1e-6.
  Twist log() const;

  SE3 inverse() const {
    Eigen::Matrix3d rt = rotation_.transpose();
    return SE3(rt, -(rt * translation_));
  }

  SE3 operator*(const SE3& rhs) const {
    return SE3(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_);
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation_ * p + translation_;
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = rotation_;
    m.block<3, 1>(0, 3) = translation_;
    return m;
  }

  /// Rotation angle in [0, pi].
  double rotation_angle() const;

  /// True if the rotation block is orthonormal with unit determinant
  /// within `tol` (Frobenius) and all entries are finite.
  bool is_valid(double tol = 1e-9) const;

  /// Nearest rotation by polar decomposition. Call after long
  /// composition chains (> ~1000 composes) to remove drift.
  SE3 orthonormalized() const;

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// Skew-symmetric matrix such that skew(a) * b = a x b.
inline Eigen::Matrix3d skew(const Eigen::Vector3d& a) {
  Eigen::Matrix3d s;
  s << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return s;
}

/// L1 norm of the 6 twist coordinates of log(t). Zero iff t is the
/// identity. Throws AngleNearPi like log().
double pose_error_l1(const SE3& t);

}  // namespace fmreg
