#pragma once

#include <Eigen/Core>
#include <variant>
#include <vector>

#include "olt/geometry.hpp"

namespace olt {

/// Revolute joint: fixed offset from the parent frame, then rotation about `axis`.
struct Joint {
  Pose parent_transform;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
};

/// Rigid link attached to the joint of the same index. Inertia is about the com.
struct Link {
  double mass = 1.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Identity();
};

/// Serial chain of revolute joints ending in a camera frame. Immutable once built.
class KinematicChain {
 public:
  /// Throws ValidationError on non-positive masses, non-PD inertias,
  /// non-unit axes or mismatched joint/link counts.
  KinematicChain(std::vector<Joint> joints, std::vector<Link> links, Pose camera_offset,
                 Eigen::Vector3d gravity);

  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<Link>& links() const { return links_; }
  const Pose& camera_offset() const { return camera_offset_; }
  const Eigen::Vector3d& gravity() const { return gravity_; }

  /// Same geometry and inertia, different gravity.
  KinematicChain with_gravity(const Eigen::Vector3d& gravity) const;

 private:
  std::vector<Joint> joints_;
  std::vector<Link> links_;
  Pose camera_offset_;
  Eigen::Vector3d gravity_;
};

struct RobotState {
  Eigen::VectorXd q;
  Eigen::VectorXd dq;

  RobotState() = default;
  RobotState(Eigen::VectorXd q_, Eigen::VectorXd dq_) : q(std::move(q_)), dq(std::move(dq_)) {}
  static RobotState at_rest(const Eigen::VectorXd& q);

  int dof() const { return static_cast<int>(q.size()); }
  /// Stacked (q, dq).
  Eigen::VectorXd vector() const;
  static RobotState from_vector(const Eigen::VectorXd& x);
};

struct ControlCommand {
  Eigen::VectorXd tau;
};

/// Decoupled unit-free test plant: ddq = tau ./ mass_diag.
struct DoubleIntegrator {
  Eigen::VectorXd mass_diag;
};

using PlantModel = std::variant<DoubleIntegrator, KinematicChain>;

int plant_dof(const PlantModel& model);

/// Base-to-camera transform T_BC(q).
Pose forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q);
/// Base-to-link transforms after each joint rotation.
std::vector<Pose> link_poses(const KinematicChain& chain, const Eigen::VectorXd& q);
/// Body twist of the camera frame, expressed in the camera frame.
Twist camera_velocity(const KinematicChain& chain, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& dq);

/// Recursive Newton-Euler inverse dynamics.
Eigen::VectorXd rnea(const KinematicChain& chain, const Eigen::VectorXd& q,
                     const Eigen::VectorXd& dq, const Eigen::VectorXd& ddq);
/// Articulated-body forward dynamics.
Eigen::VectorXd aba(const KinematicChain& chain, const Eigen::VectorXd& q,
                    const Eigen::VectorXd& dq, const Eigen::VectorXd& tau);
/// rnea(q, 0, 0): the torque holding the chain static.
Eigen::VectorXd gravity_torque(const KinematicChain& chain, const Eigen::VectorXd& q);

Eigen::VectorXd aba(const PlantModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& dq,
                    const Eigen::VectorXd& tau);
Eigen::VectorXd gravity_torque(const PlantModel& model, const Eigen::VectorXd& q);

/// One semi-implicit Euler step: dq' = dq + dt * ddq, q' = q + dt * dq'.
RobotState integrate_plant(const PlantModel& model, const RobotState& state,
                           const ControlCommand& u, double dt);

/// Three revolute joints (yaw, yaw, pitch), unit-length links of 1 kg, camera
/// at the tip looking along the last link.
KinematicChain make_arm3();
/// One joint about x with the com at (0, com_distance, 0) and a point-like inertia.
KinematicChain make_pendulum(double mass, double com_distance, double gravity = 9.81);

}  // namespace olt
