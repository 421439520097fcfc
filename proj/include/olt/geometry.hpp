#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <iosfwd>
#include <string>

namespace olt {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Rigid transform in SE(3), rotation kept as a unit quaternion.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t);

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t);
  static Pose from_rotation(const Eigen::Quaterniond& q);
  /// Rotation of `angle` radians about `axis` (normalized internally).
  static Pose from_axis_angle(const Eigen::Vector3d& axis, double angle);
  static Pose from_matrix(const Eigen::Matrix4d& m);

  Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const;

  Pose operator*(const Pose& rhs) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const;
};

/// Twist coordinates xi = (v, omega).
struct Twist {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();

  Twist() = default;
  Twist(const Eigen::Vector3d& v, const Eigen::Vector3d& w) : linear(v), angular(w) {}

  Vector6d vector() const;
  static Twist from_vector(const Vector6d& xi);
};

/// Separation between two poses.
struct PoseError {
  double trans = 0.0;  ///< meters
  double rot = 0.0;    ///< radians
};

/// Below this angle exp/log switch to Taylor expansions.
inline constexpr double kSmallAngle = 1e-7;
/// log refuses rotations with angle >= pi - kNearPiMargin.
inline constexpr double kNearPiMargin = 1e-6;

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

Eigen::Quaterniond so3_exp(const Eigen::Vector3d& omega);
/// Throws AngleNearPi when the rotation angle is within kNearPiMargin of pi.
Eigen::Vector3d so3_log(const Eigen::Quaterniond& q);

Pose exp(const Twist& xi);
Pose exp(const Vector6d& xi);
/// Throws AngleNearPi, see so3_log.
Twist log(const Pose& pose);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& pose);
/// Geodesic a * exp(alpha * log(a^-1 b)).
Pose interpolate(const Pose& a, const Pose& b, double alpha);
PoseError pose_distance(const Pose& a, const Pose& b);

/// Rotation angle in [0, pi] of a unit quaternion.
double rotation_angle(const Eigen::Quaterniond& q);

/// "tx ty tz qx qy qz qw", shortest round-trip decimal form.
std::string format_pose(const Pose& pose);
/// Inverse of format_pose; the quaternion is renormalized.
Pose parse_pose(const std::string& text);

std::ostream& operator<<(std::ostream& os, const Pose& pose);

}  // namespace olt
