// Independent reference implementations used only by tests. These must
// not share code paths with the library: the exp oracle is a truncated
// matrix-exponential series, the log oracle is Eigen's Schur-based
// matrix logarithm, and pose products are raw 4x4 matrix arithmetic.
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <random>

#include "fmreg/se3.hpp"
#include "fmreg/synth.hpp"

namespace oracles {

inline Eigen::Matrix4d twist_hat(const fmreg::Twist& xi) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m.block<3, 3>(0, 0) = fmreg::skew(xi.angular);
  m.block<3, 1>(0, 3) = xi.linear;
  return m;
}

/// exp(hat(xi)) via a 20-term power series.
inline Eigen::Matrix4d exp_series(const fmreg::Twist& xi, int terms = 20) {
  const Eigen::Matrix4d a = twist_hat(xi);
  Eigen::Matrix4d sum = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d power = Eigen::Matrix4d::Identity();
  double factorial = 1.0;
  for (int k = 1; k <= terms; ++k) {
    power = power * a;
    factorial *= k;
    sum += power / factorial;
  }
  return sum;
}

/// log of a rigid 4x4 matrix via Eigen's general matrix logarithm,
/// un-hatted into the 6 twist coordinates.
inline fmreg::Vector6d log_matrix(const Eigen::Matrix4d& t) {
  const Eigen::Matrix4d l = t.log();
  fmreg::Vector6d xi;
  xi.head<3>() = l.block<3, 1>(0, 3);
  // Average the antisymmetric part; the series result is already skew.
  xi(3) = 0.5 * (l(2, 1) - l(1, 2));
  xi(4) = 0.5 * (l(0, 2) - l(2, 0));
  xi(5) = 0.5 * (l(1, 0) - l(0, 1));
  return xi;
}

inline double pose_error_l1_matrix(const Eigen::Matrix4d& t) {
  return log_matrix(t).cwiseAbs().sum();
}

/// Deterministic random twist with ||w|| <= max_angle.
inline fmreg::Twist random_twist(std::mt19937_64& rng, double max_trans,
                                 double max_angle) {
  auto u = [&rng]() { return 2.0 * fmreg::uniform01(rng) - 1.0; };
  Eigen::Vector3d v(u(), u(), u());
  Eigen::Vector3d w(u(), u(), u());
  v *= max_trans;
  if (w.norm() > 1e-12) {
    w = w.normalized() * (max_angle * fmreg::uniform01(rng));
  }
  return fmreg::Twist(v, w);
}

inline fmreg::SE3 random_pose(std::mt19937_64& rng, double max_trans = 2.0,
                              double max_angle = 2.5) {
  return fmreg::SE3::exp(random_twist(rng, max_trans, max_angle));
}

}  // namespace oracles
