#include "olt/geometry.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

#include "olt/errors.hpp"

namespace olt {
namespace {

Eigen::Quaterniond normalized(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond out = q;
  out.normalize();
  return out;
}

// V(omega) couples rotation into translation for exp. B and C are the
// coefficients of W and W^2.
Eigen::Matrix3d left_jacobian(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  const Eigen::Matrix3d w = skew(omega);
  double b, c;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    b = 0.5 - t2 / 24.0;
    c = 1.0 / 6.0 - t2 / 120.0;
  } else {
    const double t2 = theta * theta;
    const double half_sin = std::sin(0.5 * theta);
    b = 2.0 * half_sin * half_sin / t2;
    c = (theta - std::sin(theta)) / (t2 * theta);
  }
  return Eigen::Matrix3d::Identity() + b * w + c * w * w;
}

Eigen::Matrix3d left_jacobian_inverse(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  const Eigen::Matrix3d w = skew(omega);
  double d;
  if (theta < kSmallAngle) {
    d = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    const double half = 0.5 * theta;
    d = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
  }
  return Eigen::Matrix3d::Identity() - 0.5 * w + d * w * w;
}

void append_number(std::string& out, double value) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

}  // namespace

Pose::Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
    : rotation(normalized(q)), translation(t) {}

Pose Pose::from_translation(const Eigen::Vector3d& t) {
  return {Eigen::Quaterniond::Identity(), t};
}

Pose Pose::from_rotation(const Eigen::Quaterniond& q) { return {q, Eigen::Vector3d::Zero()}; }

Pose Pose::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  return from_rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
}

Pose Pose::from_matrix(const Eigen::Matrix4d& m) {
  return {Eigen::Quaterniond(Eigen::Matrix3d(m.topLeftCorner<3, 3>())),
          m.topRightCorner<3, 1>()};
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose Pose::operator*(const Pose& rhs) const { return compose(*this, rhs); }

Eigen::Vector3d Pose::operator*(const Eigen::Vector3d& p) const {
  return rotation * p + translation;
}

Vector6d Twist::vector() const {
  Vector6d xi;
  xi << linear, angular;
  return xi;
}

Twist Twist::from_vector(const Vector6d& xi) { return {xi.head<3>(), xi.tail<3>()}; }

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Quaterniond so3_exp(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  if (theta < kSmallAngle) {
    Eigen::Quaterniond q(1.0 - theta * theta / 8.0, 0.5 * omega.x(), 0.5 * omega.y(),
                         0.5 * omega.z());
    return normalized(q);
  }
  const double half = 0.5 * theta;
  const Eigen::Vector3d v = (std::sin(half) / theta) * omega;
  return normalized(Eigen::Quaterniond(std::cos(half), v.x(), v.y(), v.z()));
}

Eigen::Vector3d so3_log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = normalized(q_in);
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Eigen::Vector3d v = q.vec();
  const double n = v.norm();
  const double theta = 2.0 * std::atan2(n, q.w());
  if (theta >= std::numbers::pi - kNearPiMargin) {
    throw AngleNearPi("log: rotation angle " + std::to_string(theta) + " is too close to pi");
  }
  if (theta < kSmallAngle) return (2.0 / q.w()) * v;
  return (theta / n) * v;
}

Pose exp(const Twist& xi) {
  return {so3_exp(xi.angular), left_jacobian(xi.angular) * xi.linear};
}

Pose exp(const Vector6d& xi) { return exp(Twist::from_vector(xi)); }

Twist log(const Pose& pose) {
  const Eigen::Vector3d omega = so3_log(pose.rotation);
  return {left_jacobian_inverse(omega) * pose.translation, omega};
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose inverse(const Pose& pose) {
  const Eigen::Quaterniond qi = pose.rotation.conjugate();
  return {qi, -(qi * pose.translation)};
}

Pose interpolate(const Pose& a, const Pose& b, double alpha) {
  const Twist delta = log(inverse(a) * b);
  return a * exp(Twist(alpha * delta.linear, alpha * delta.angular));
}

double rotation_angle(const Eigen::Quaterniond& q) {
  const Eigen::Quaterniond u = normalized(q);
  return 2.0 * std::atan2(u.vec().norm(), std::abs(u.w()));
}

PoseError pose_distance(const Pose& a, const Pose& b) {
  return {(a.translation - b.translation).norm(),
          rotation_angle(a.rotation.conjugate() * b.rotation)};
}

std::string format_pose(const Pose& pose) {
  const double values[7] = {pose.translation.x(), pose.translation.y(), pose.translation.z(),
                            pose.rotation.x(),    pose.rotation.y(),    pose.rotation.z(),
                            pose.rotation.w()};
  std::string out;
  for (int i = 0; i < 7; ++i) {
    if (i) out.push_back(' ');
    append_number(out, values[i]);
  }
  return out;
}

Pose parse_pose(const std::string& text) {
  std::istringstream in(text);
  std::vector<double> v;
  double x;
  while (in >> x) v.push_back(x);
  if (!in.eof() || v.size() != 7) {
    throw DimensionMismatch("pose needs 7 numbers (tx ty tz qx qy qz qw), got '" + text + "'");
  }
  const Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
  if (q.norm() < 1e-12) throw DimensionMismatch("pose quaternion has zero norm");
  return {q, Eigen::Vector3d(v[0], v[1], v[2])};
}

std::ostream& operator<<(std::ostream& os, const Pose& pose) { return os << format_pose(pose); }

}  // namespace olt
