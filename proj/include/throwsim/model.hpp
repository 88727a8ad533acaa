#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>

namespace throwsim {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

inline constexpr int kNumJoints = 6;
inline constexpr int kNumActuated = 4;
inline constexpr int kNumPassive = 2;

enum class JointType { Revolute, Prismatic };

struct JointSpec {
  JointType type = JointType::Revolute;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();  // unit, in the parent frame
  Eigen::Vector3d offset = Eigen::Vector3d::Zero(); // joint origin in the parent link frame
  double pos_min = -1.0;
  double pos_max = 1.0;
  double vel_limit = 1.0;                           // symmetric command limit
  bool passive = false;
};

struct LinkSpec {
  double mass = 1.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();     // in the link frame
  Eigen::Vector3d inertia = Eigen::Vector3d::Ones(); // diagonal, about the CoM
  double capsule_radius = 0.1;
  Eigen::Vector3d capsule_a = Eigen::Vector3d::Zero();
  Eigen::Vector3d capsule_b = Eigen::Vector3d::Zero();
};

// Eq.-style passive-joint friction: accel = upsilon*|w| + eta opposing motion.
struct FrictionParams {
  double upsilon = 0.03;  // damping coefficient [1/s]
  double eta = 0.1;       // velocity-independent component [rad/s^2]
};

// Serial 6-joint chain: cabin yaw, boom pitch, dipper pitch, telescope
// (prismatic), passive gripper pitch, passive gripper roll. The base frame
// sits on the ground under the cabin turn axis, z up.
struct MachineModel {
  std::array<JointSpec, kNumJoints> joints;
  std::array<LinkSpec, kNumJoints> links;
  double base_height = 2.0;
  Eigen::Vector3d gripper_offset = Eigen::Vector3d(0, 0, -0.85);  // gripper center in link-6 frame
  double cabin_radius = 1.7;
  double cabin_height = 2.6;
  double max_reach = 7.5;  // static reach r_max, checked against the hanging-tool optimum
  double gravity = 9.81;
  FrictionParams friction;
  double payload_mass = 0.0;  // extra point mass held at the gripper center
};

struct MachineState {
  Vector6d q = Vector6d::Zero();
  Vector6d dq = Vector6d::Zero();
  double time = 0.0;
  bool payload_attached = false;
};

MachineModel load_machine_model(const std::string& path);
// Structural and positivity checks; throws ConfigError with the offending field.
void validate_model(const MachineModel& model);

// Maximum horizontal gripper-center distance over the actuated joint limits
// with the tool hanging at its gravity equilibrium (grid search + polish).
double compute_static_reach(const MachineModel& model);

// Copy of `model` with a point mass attached at the gripper center.
MachineModel with_payload(const MachineModel& model, double mass);

}  // namespace throwsim
