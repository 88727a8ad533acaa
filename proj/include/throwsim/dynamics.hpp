#pragma once

#include <array>

#include "throwsim/model.hpp"

namespace throwsim {

struct GripperPose {
  Eigen::Vector3d position;  // gripper center, base frame (z from the ground plane)
  Eigen::Matrix3d rotation;  // gripper frame in the base frame
};

// World pose of every joint frame, plus the gripper pose.
struct ChainPoses {
  std::array<Eigen::Matrix3d, kNumJoints> rotation;
  std::array<Eigen::Vector3d, kNumJoints> origin;
};

ChainPoses chain_poses(const MachineModel& model, const Vector6d& q);
GripperPose forward_kinematics(const MachineModel& model, const Vector6d& q);

// 3x6 position Jacobian of the gripper center.
Eigen::Matrix<double, 3, 6> gripper_jacobian(const MachineModel& model, const Vector6d& q);
Eigen::Vector3d gripper_velocity(const MachineModel& model, const Vector6d& q, const Vector6d& dq);

// Joint-space inertia matrix via the composite-rigid-body algorithm.
Matrix6d mass_matrix(const MachineModel& model, const Vector6d& q);

// Recursive Newton-Euler: tau = M(q) ddq + C(q,dq) dq + g(q).
Vector6d inverse_dynamics(const MachineModel& model, const Vector6d& q, const Vector6d& dq,
                          const Vector6d& ddq);
// Coriolis/centrifugal + gravity forces (inverse dynamics with ddq = 0).
Vector6d bias_forces(const MachineModel& model, const Vector6d& q, const Vector6d& dq);

// Solves M ddq = tau - bias. Throws on a singular inertia matrix.
Vector6d forward_dynamics(const MachineModel& model, const Vector6d& q, const Vector6d& dq,
                          const Vector6d& tau);

struct HybridResult {
  Eigen::Vector4d tau_actuated;
  Eigen::Vector2d ddq_passive;
};

// Joints 1-4 actuated (desired accelerations given), joints 5-6 passive
// (torques given): solves simultaneously for actuated torques and passive
// accelerations.
HybridResult hybrid_dynamics(const MachineModel& model, const Vector6d& q, const Vector6d& dq,
                             const Eigen::Vector4d& ddq_des_actuated,
                             const Eigen::Vector2d& tau_passive);

// General partition used by the fixed 4+2 wrapper and by tests; `actuated[i]`
// selects whether ddq_des[i] (true) or tau_in[i] (false) is prescribed.
void hybrid_dynamics_general(const MachineModel& model, const Vector6d& q, const Vector6d& dq,
                             const std::array<bool, kNumJoints>& actuated,
                             const Vector6d& ddq_des, const Vector6d& tau_in, Vector6d* tau_out,
                             Vector6d* ddq_out);

// Signed friction acceleration opposing motion; 0 at zero velocity.
double friction_accel(const FrictionParams& params, double dtheta);

// Generalized friction force for the passive joints: per-joint diagonal
// inertia times the friction acceleration, magnitude clamped so the
// acceleration alone cannot reverse the joint velocity within dt.
Eigen::Vector2d passive_friction_torque(const Matrix6d& mass, const Vector6d& dq,
                                        const FrictionParams& params, double dt);

struct IntegrateResult {
  MachineState state;
  std::array<bool, kNumJoints> clamped{};  // joints that hit a position limit
};

// Semi-implicit Euler step with joint-limit clamping (velocity zeroed on a
// clamped axis).
IntegrateResult integrate_step(const MachineModel& model, const MachineState& state,
                               const Vector6d& ddq, double dt);

struct CollisionFlags {
  bool self_collision = false;
  bool ground_collision = false;
};

CollisionFlags check_collision(const MachineModel& model, const Vector6d& q);

// Kinetic + gravitational potential energy (z measured from the ground).
double total_energy(const MachineModel& model, const Vector6d& q, const Vector6d& dq);

// Shared per-substep dynamics context so controllers and the simulator reuse
// one CRBA/RNEA evaluation.
struct DynamicsContext {
  Matrix6d mass;
  Vector6d bias;
  Eigen::LDLT<Matrix6d> mass_ldlt;
  void compute(const MachineModel& model, const Vector6d& q, const Vector6d& dq);
};

}  // namespace throwsim
