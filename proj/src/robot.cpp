#include "olt/robot.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <string>

#include "olt/errors.hpp"

namespace olt {
namespace {

using Matrix6d = Eigen::Matrix<double, 6, 6>;

// Spatial vectors are ordered (angular, linear).

Matrix6d motion_transform(const Pose& child_in_parent) {
  const Eigen::Matrix3d et = child_in_parent.rotation_matrix().transpose();
  Matrix6d x = Matrix6d::Zero();
  x.topLeftCorner<3, 3>() = et;
  x.bottomRightCorner<3, 3>() = et;
  x.bottomLeftCorner<3, 3>() = -et * skew(child_in_parent.translation);
  return x;
}

Matrix6d cross_motion(const Vector6d& v) {
  Matrix6d m = Matrix6d::Zero();
  const Eigen::Matrix3d wx = skew(v.head<3>());
  m.topLeftCorner<3, 3>() = wx;
  m.bottomRightCorner<3, 3>() = wx;
  m.bottomLeftCorner<3, 3>() = skew(v.tail<3>());
  return m;
}

Matrix6d cross_force(const Vector6d& v) { return -cross_motion(v).transpose(); }

Matrix6d spatial_inertia(const Link& link) {
  const Eigen::Matrix3d cx = skew(link.com);
  Matrix6d m = Matrix6d::Zero();
  m.topLeftCorner<3, 3>() = link.inertia + link.mass * cx * cx.transpose();
  m.topRightCorner<3, 3>() = link.mass * cx;
  m.bottomLeftCorner<3, 3>() = link.mass * cx.transpose();
  m.bottomRightCorner<3, 3>() = link.mass * Eigen::Matrix3d::Identity();
  return m;
}

Vector6d joint_subspace(const Joint& joint) {
  Vector6d s = Vector6d::Zero();
  s.head<3>() = joint.axis;
  return s;
}

Pose joint_pose(const Joint& joint, double angle) {
  return joint.parent_transform *
         Pose::from_rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, joint.axis)));
}

void check_dim(const KinematicChain& chain, const Eigen::VectorXd& v, const char* what) {
  if (v.size() != chain.dof()) {
    throw DimensionMismatch(std::string(what) + " has " + std::to_string(v.size()) +
                            " entries, chain has " + std::to_string(chain.dof()) + " joints");
  }
}

Vector6d base_acceleration(const KinematicChain& chain) {
  Vector6d a = Vector6d::Zero();
  a.tail<3>() = -chain.gravity();
  return a;
}

}  // namespace

KinematicChain::KinematicChain(std::vector<Joint> joints, std::vector<Link> links,
                               Pose camera_offset, Eigen::Vector3d gravity)
    : joints_(std::move(joints)),
      links_(std::move(links)),
      camera_offset_(camera_offset),
      gravity_(gravity) {
  if (joints_.empty()) throw ValidationError("chain.joints", "at least one joint required");
  if (joints_.size() != links_.size()) {
    throw ValidationError("chain.links", "one link per joint required");
  }
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const std::string idx = std::to_string(i);
    if (std::abs(joints_[i].axis.norm() - 1.0) > 1e-9) {
      throw ValidationError("joint." + idx + ".axis", "must be a unit vector");
    }
    const Link& l = links_[i];
    if (!(l.mass > 0.0)) throw ValidationError("link." + idx + ".mass", "must be > 0");
    if ((l.inertia - l.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw ValidationError("link." + idx + ".inertia", "must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(l.inertia);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) {
      throw ValidationError("link." + idx + ".inertia", "must be positive definite");
    }
  }
}

KinematicChain KinematicChain::with_gravity(const Eigen::Vector3d& gravity) const {
  return {joints_, links_, camera_offset_, gravity};
}

RobotState RobotState::at_rest(const Eigen::VectorXd& q) {
  return {q, Eigen::VectorXd::Zero(q.size())};
}

Eigen::VectorXd RobotState::vector() const {
  Eigen::VectorXd x(q.size() + dq.size());
  x << q, dq;
  return x;
}

RobotState RobotState::from_vector(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size() / 2;
  return {x.head(n), x.tail(n)};
}

int plant_dof(const PlantModel& model) {
  if (const auto* chain = std::get_if<KinematicChain>(&model)) return chain->dof();
  return static_cast<int>(std::get<DoubleIntegrator>(model).mass_diag.size());
}

std::vector<Pose> link_poses(const KinematicChain& chain, const Eigen::VectorXd& q) {
  check_dim(chain, q, "q");
  std::vector<Pose> out;
  out.reserve(chain.joints().size());
  Pose t;
  for (int i = 0; i < chain.dof(); ++i) {
    t = t * joint_pose(chain.joints()[i], q[i]);
    out.push_back(t);
  }
  return out;
}

Pose forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q) {
  return link_poses(chain, q).back() * chain.camera_offset();
}

Twist camera_velocity(const KinematicChain& chain, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& dq) {
  check_dim(chain, q, "q");
  check_dim(chain, dq, "dq");
  Vector6d v = Vector6d::Zero();
  for (int i = 0; i < chain.dof(); ++i) {
    const Joint& j = chain.joints()[i];
    v = motion_transform(joint_pose(j, q[i])) * v + joint_subspace(j) * dq[i];
  }
  const Vector6d vc = motion_transform(chain.camera_offset()) * v;
  return {vc.tail<3>(), vc.head<3>()};
}

Eigen::VectorXd rnea(const KinematicChain& chain, const Eigen::VectorXd& q,
                     const Eigen::VectorXd& dq, const Eigen::VectorXd& ddq) {
  check_dim(chain, q, "q");
  check_dim(chain, dq, "dq");
  check_dim(chain, ddq, "ddq");
  const int n = chain.dof();
  std::vector<Matrix6d> xs(n);
  std::vector<Vector6d> forces(n);
  Vector6d v = Vector6d::Zero();
  Vector6d a = base_acceleration(chain);
  for (int i = 0; i < n; ++i) {
    const Joint& j = chain.joints()[i];
    const Vector6d s = joint_subspace(j);
    xs[i] = motion_transform(joint_pose(j, q[i]));
    v = xs[i] * v + s * dq[i];
    a = xs[i] * a + s * ddq[i] + cross_motion(v) * s * dq[i];
    const Matrix6d inertia = spatial_inertia(chain.links()[i]);
    forces[i] = inertia * a + cross_force(v) * inertia * v;
  }
  Eigen::VectorXd tau(n);
  for (int i = n - 1; i >= 0; --i) {
    tau[i] = joint_subspace(chain.joints()[i]).dot(forces[i]);
    if (i > 0) forces[i - 1] += xs[i].transpose() * forces[i];
  }
  return tau;
}

Eigen::VectorXd aba(const KinematicChain& chain, const Eigen::VectorXd& q,
                    const Eigen::VectorXd& dq, const Eigen::VectorXd& tau) {
  check_dim(chain, q, "q");
  check_dim(chain, dq, "dq");
  check_dim(chain, tau, "tau");
  const int n = chain.dof();
  std::vector<Matrix6d> xs(n), ia(n);
  std::vector<Vector6d> s(n), c(n), pa(n), u_vec(n);
  std::vector<double> d(n), u(n);

  Vector6d v = Vector6d::Zero();
  for (int i = 0; i < n; ++i) {
    const Joint& j = chain.joints()[i];
    s[i] = joint_subspace(j);
    xs[i] = motion_transform(joint_pose(j, q[i]));
    v = xs[i] * v + s[i] * dq[i];
    c[i] = cross_motion(v) * s[i] * dq[i];
    ia[i] = spatial_inertia(chain.links()[i]);
    pa[i] = cross_force(v) * ia[i] * v;
  }

  for (int i = n - 1; i >= 0; --i) {
    u_vec[i] = ia[i] * s[i];
    d[i] = s[i].dot(u_vec[i]);
    u[i] = tau[i] - s[i].dot(pa[i]);
    if (i > 0) {
      const Matrix6d ia_art = ia[i] - u_vec[i] * u_vec[i].transpose() / d[i];
      const Vector6d pa_art = pa[i] + ia_art * c[i] + u_vec[i] * (u[i] / d[i]);
      ia[i - 1] += xs[i].transpose() * ia_art * xs[i];
      pa[i - 1] += xs[i].transpose() * pa_art;
    }
  }

  Eigen::VectorXd ddq(n);
  Vector6d a = base_acceleration(chain);
  for (int i = 0; i < n; ++i) {
    const Vector6d a_prime = xs[i] * a + c[i];
    ddq[i] = (u[i] - u_vec[i].dot(a_prime)) / d[i];
    a = a_prime + s[i] * ddq[i];
  }
  return ddq;
}

Eigen::VectorXd gravity_torque(const KinematicChain& chain, const Eigen::VectorXd& q) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(chain.dof());
  return rnea(chain, q, zero, zero);
}

Eigen::VectorXd aba(const PlantModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& dq,
                    const Eigen::VectorXd& tau) {
  if (const auto* chain = std::get_if<KinematicChain>(&model)) return aba(*chain, q, dq, tau);
  const auto& di = std::get<DoubleIntegrator>(model);
  if (q.size() != di.mass_diag.size() || dq.size() != q.size() || tau.size() != q.size()) {
    throw DimensionMismatch("double integrator: state/torque size does not match mass_diag");
  }
  return tau.cwiseQuotient(di.mass_diag);
}

Eigen::VectorXd gravity_torque(const PlantModel& model, const Eigen::VectorXd& q) {
  if (const auto* chain = std::get_if<KinematicChain>(&model)) return gravity_torque(*chain, q);
  return Eigen::VectorXd::Zero(q.size());
}

RobotState integrate_plant(const PlantModel& model, const RobotState& state,
                           const ControlCommand& u, double dt) {
  if (!(dt > 0.0)) throw ValidationError("dt", "must be > 0");
  const Eigen::VectorXd ddq = aba(model, state.q, state.dq, u.tau);
  RobotState next;
  next.dq = state.dq + dt * ddq;
  next.q = state.q + dt * next.dq;
  return next;
}

KinematicChain make_arm3() {
  const Eigen::Vector3d link_dir = Eigen::Vector3d::UnitX();
  Link rod;
  rod.mass = 1.0;
  rod.com = 0.5 * link_dir;
  rod.inertia = Eigen::Vector3d(1e-3, 1.0 / 12.0, 1.0 / 12.0).asDiagonal();

  std::vector<Joint> joints(3);
  joints[0].axis = Eigen::Vector3d::UnitZ();
  joints[1].parent_transform = Pose::from_translation(link_dir);
  joints[1].axis = Eigen::Vector3d::UnitZ();
  joints[2].parent_transform = Pose::from_translation(link_dir);
  joints[2].axis = Eigen::Vector3d::UnitY();

  // Optical axis (camera z) along the last link.
  const Pose camera = Pose(Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi / 2,
                                                                Eigen::Vector3d::UnitY())),
                           link_dir);
  return {joints, {rod, rod, rod}, camera, Eigen::Vector3d(0.0, 0.0, -9.81)};
}

KinematicChain make_pendulum(double mass, double com_distance, double gravity) {
  Joint j;
  j.axis = Eigen::Vector3d::UnitX();
  Link l;
  l.mass = mass;
  l.com = Eigen::Vector3d(0.0, com_distance, 0.0);
  l.inertia = 1e-3 * Eigen::Matrix3d::Identity();
  return {{j}, {l}, Pose(), Eigen::Vector3d(0.0, 0.0, -gravity)};
}

}  // namespace olt
