#include "fmreg/se3.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

namespace fmreg {

namespace {

constexpr double kSmallAngle = 1e-8;
constexpr double kMaxLogAngle = M_PI - 1e-6;

}  // namespace

SE3 SE3::exp(const Twist& xi) {
  const Eigen::Vector3d& w = xi.angular;
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);

  // Rodrigues coefficients:
  //   R = I + a * [w]x + b * [w]x^2
  //   V = I + b * [w]x + c * [w]x^2     (left Jacobian)
  double a, b, c;
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double s = std::sin(0.5 * theta);
    a = std::sin(theta) / theta;
    b = 2.0 * s * s / theta2;  // (1 - cos) / theta^2 without cancellation
    c = (1.0 - a) / theta2;
  }

  const Eigen::Matrix3d wx = skew(w);
  const Eigen::Matrix3d wx2 = wx * wx;
  const Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity() + a * wx + b * wx2;
  const Eigen::Matrix3d v = Eigen::Matrix3d::Identity() + b * wx + c * wx2;
  return SE3(rotation, v * xi.linear);
}

double SE3::rotation_angle() const {
  // atan2 of the (sin, cos) pair is well conditioned over the whole range,
  // unlike acos of (trace-1)/2 near 0 and pi.
  const Eigen::Vector3d sin_axis(rotation_(2, 1) - rotation_(1, 2),
                                 rotation_(0, 2) - rotation_(2, 0),
                                 rotation_(1, 0) - rotation_(0, 1));
  const double s = 0.5 * sin_axis.norm();
  const double cos_theta = 0.5 * (rotation_.trace() - 1.0);
  return std::atan2(s, cos_theta);
}

Twist SE3::log() const {
  const double theta = rotation_angle();
  if (theta >= kMaxLogAngle) throw AngleNearPi();

  Eigen::Vector3d w;
  const Eigen::Vector3d vee(rotation_(2, 1) - rotation_(1, 2),
                            rotation_(0, 2) - rotation_(2, 0),
                            rotation_(1, 0) - rotation_(0, 1));
  if (theta < kSmallAngle) {
    w = 0.5 * (1.0 + theta * theta / 6.0) * vee;
  } else {
    w = theta / (2.0 * std::sin(theta)) * vee;
  }

  // V^{-1} = I - 1/2 [w]x + e * [w]x^2
  double e;
  if (theta < kSmallAngle) {
    e = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    e = 1.0 / (theta * theta) -
        (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  const Eigen::Matrix3d wx = skew(w);
  const Eigen::Matrix3d v_inv =
      Eigen::Matrix3d::Identity() - 0.5 * wx + e * (wx * wx);
  return Twist(v_inv * translation_, w);
}

bool SE3::is_valid(double tol) const {
  if (!rotation_.allFinite() || !translation_.allFinite()) return false;
  const Eigen::Matrix3d rtr = rotation_.transpose() * rotation_;
  if ((rtr - Eigen::Matrix3d::Identity()).norm() > tol) return false;
  if (std::abs(rotation_.determinant() - 1.0) > tol) return false;
  return true;
}

SE3 SE3::orthonormalized() const {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation_,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return SE3(r, translation_);
}

double pose_error_l1(const SE3& t) {
  return t.log().coeffs().cwiseAbs().sum();
}

}  // namespace fmreg
