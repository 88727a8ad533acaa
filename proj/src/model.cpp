#include "throwsim/model.hpp"

#include <algorithm>
#include <cmath>

#include "throwsim/config.hpp"
#include "throwsim/dynamics.hpp"

namespace throwsim {

namespace {

Eigen::Vector3d get_vec3(const KeyValueFile& kv, const std::string& key) {
  const auto v = kv.get_doubles(key);
  if (v.size() != 3) {
    throw ConfigError(kv.origin() + ": key '" + key + "': expected 3 values");
  }
  return Eigen::Vector3d(v[0], v[1], v[2]);
}

JointType parse_joint_type(const KeyValueFile& kv, const std::string& key) {
  const std::string t = kv.get_string(key);
  if (t == "revolute") return JointType::Revolute;
  if (t == "prismatic") return JointType::Prismatic;
  throw ConfigError(kv.origin() + ": key '" + key + "': expected revolute|prismatic");
}

// Tool hanging at its gravity equilibrium: pitch cancels the cumulative
// boom+dipper pitch, roll stays zero.
Vector6d hanging_configuration(const MachineModel& model, double q1, double q2, double q3,
                               double q4) {
  Vector6d q;
  q << q1, q2, q3, q4, std::clamp(-(q2 + q3), model.joints[4].pos_min, model.joints[4].pos_max),
      0.0;
  return q;
}

double horizontal_reach(const MachineModel& model, double q2, double q3, double q4) {
  const Vector6d q = hanging_configuration(model, 0.0, q2, q3, q4);
  const GripperPose pose = forward_kinematics(model, q);
  return pose.position.head<2>().norm();
}

}  // namespace

MachineModel load_machine_model(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::parse_file(path);
  MachineModel m;
  m.base_height = kv.get_double("base_height");
  m.gravity = kv.get_double("gravity", 9.81);
  m.max_reach = kv.get_double("max_reach");
  m.cabin_radius = kv.get_double("cabin.radius");
  m.cabin_height = kv.get_double("cabin.height");
  m.gripper_offset = get_vec3(kv, "gripper.offset");
  m.payload_mass = kv.get_double("payload_mass", 0.0);
  m.friction.upsilon = kv.get_double("friction.upsilon", 0.03);
  m.friction.eta = kv.get_double("friction.eta", 0.1);

  for (int i = 0; i < kNumJoints; ++i) {
    const std::string j = "j" + std::to_string(i + 1);
    JointSpec& joint = m.joints[i];
    joint.type = parse_joint_type(kv, j + ".type");
    joint.axis = get_vec3(kv, j + ".axis").normalized();
    joint.offset = (i == 0) ? Eigen::Vector3d(0, 0, m.base_height) : get_vec3(kv, j + ".offset");
    const auto limits = kv.get_doubles(j + ".limits");
    if (limits.size() != 2) {
      throw ConfigError(kv.origin() + ": key '" + j + ".limits': expected 2 values");
    }
    joint.pos_min = limits[0];
    joint.pos_max = limits[1];
    joint.vel_limit = kv.get_double(j + ".vel_limit");
    joint.passive = kv.get_bool(j + ".passive");

    const std::string l = "link" + std::to_string(i + 1);
    LinkSpec& link = m.links[i];
    link.mass = kv.get_double(l + ".mass");
    link.com = get_vec3(kv, l + ".com");
    link.inertia = get_vec3(kv, l + ".inertia");
    link.capsule_radius = kv.get_double(l + ".capsule_radius");
    const Eigen::Vector3d default_b =
        (i + 1 < kNumJoints) ? m.joints[i + 1].offset : m.gripper_offset;
    // joints are loaded in order, so the child offset above is already set
    link.capsule_a = kv.has(l + ".capsule_a") ? get_vec3(kv, l + ".capsule_a")
                                              : Eigen::Vector3d::Zero();
    link.capsule_b = kv.has(l + ".capsule_b") ? get_vec3(kv, l + ".capsule_b") : default_b;
  }
  kv.require_all_used();
  validate_model(m);
  return m;
}

void validate_model(const MachineModel& m) {
  const auto fail = [](const std::string& what) { throw ConfigError("machine model: " + what); };

  const std::array<JointType, kNumJoints> expected_types = {
      JointType::Revolute, JointType::Revolute, JointType::Revolute,
      JointType::Prismatic, JointType::Revolute, JointType::Revolute};
  for (int i = 0; i < kNumJoints; ++i) {
    const JointSpec& j = m.joints[i];
    if (j.type != expected_types[i]) {
      fail("joint " + std::to_string(i + 1) + " has the wrong type for the fixed serial layout");
    }
    if (!(j.pos_min < j.pos_max)) {
      fail("joint " + std::to_string(i + 1) + ": lower limit must be below upper limit");
    }
    if (!(j.vel_limit > 0)) fail("joint " + std::to_string(i + 1) + ": vel_limit must be > 0");
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      fail("joint " + std::to_string(i + 1) + ": axis must be a unit vector");
    }
    const bool should_be_passive = i >= kNumActuated;
    if (j.passive != should_be_passive) {
      fail("joint " + std::to_string(i + 1) +
           (should_be_passive ? " must be passive" : " must be actuated"));
    }
    const LinkSpec& l = m.links[i];
    if (!(l.mass > 0)) fail("link " + std::to_string(i + 1) + ": mass must be > 0");
    if (!(l.inertia.minCoeff() > 0)) {
      fail("link " + std::to_string(i + 1) + ": inertia entries must be > 0");
    }
    if (!(l.capsule_radius > 0)) {
      fail("link " + std::to_string(i + 1) + ": capsule_radius must be > 0");
    }
  }
  // Expected axes for the fixed layout: yaw, pitch, pitch, slide-x, pitch, roll.
  if ((m.joints[0].axis - Eigen::Vector3d::UnitZ()).norm() > 1e-9) fail("j1 axis must be +z");
  if ((m.joints[1].axis - Eigen::Vector3d::UnitY()).norm() > 1e-9) fail("j2 axis must be +y");
  if ((m.joints[2].axis - Eigen::Vector3d::UnitY()).norm() > 1e-9) fail("j3 axis must be +y");
  if ((m.joints[4].axis - Eigen::Vector3d::UnitY()).norm() > 1e-9) fail("j5 axis must be +y");
  if ((m.joints[5].axis - Eigen::Vector3d::UnitX()).norm() > 1e-9) fail("j6 axis must be +x");
  if (!(m.base_height > 0)) fail("base_height must be > 0");
  if (!(m.cabin_radius > 0) || !(m.cabin_height > 0)) fail("cabin volume must be positive");
  if (!(m.max_reach > 0)) fail("max_reach must be > 0");
  if (!(m.gravity >= 0)) fail("gravity must be >= 0");
  if (m.friction.upsilon < 0 || m.friction.eta < 0) fail("friction parameters must be >= 0");
  if (m.payload_mass < 0) fail("payload_mass must be >= 0");
}

double compute_static_reach(const MachineModel& model) {
  const JointSpec& b = model.joints[1];
  const JointSpec& d = model.joints[2];
  const JointSpec& t = model.joints[3];

  double best = 0.0;
  Eigen::Vector3d best_q = Eigen::Vector3d::Zero();
  const int n = 33;
  for (int i = 0; i < n; ++i) {
    const double q2 = b.pos_min + (b.pos_max - b.pos_min) * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      const double q3 = d.pos_min + (d.pos_max - d.pos_min) * j / (n - 1);
      for (int k = 0; k < 9; ++k) {
        const double q4 = t.pos_min + (t.pos_max - t.pos_min) * k / 8;
        const double r = horizontal_reach(model, q2, q3, q4);
        if (r > best) {
          best = r;
          best_q = Eigen::Vector3d(q2, q3, q4);
        }
      }
    }
  }
  // Coordinate polish with shrinking steps.
  Eigen::Vector3d lo(b.pos_min, d.pos_min, t.pos_min), hi(b.pos_max, d.pos_max, t.pos_max);
  Eigen::Vector3d step = (hi - lo) / (n - 1);
  for (int iter = 0; iter < 60; ++iter) {
    bool improved = false;
    for (int axis = 0; axis < 3; ++axis) {
      for (double sign : {-1.0, 1.0}) {
        Eigen::Vector3d cand = best_q;
        cand[axis] = std::clamp(cand[axis] + sign * step[axis], lo[axis], hi[axis]);
        const double r = horizontal_reach(model, cand[0], cand[1], cand[2]);
        if (r > best) {
          best = r;
          best_q = cand;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
    if (step.maxCoeff() < 1e-10) break;
  }
  return best;
}

MachineModel with_payload(const MachineModel& model, double mass) {
  MachineModel out = model;
  if (mass <= 0.0) return out;
  LinkSpec& link = out.links[kNumJoints - 1];
  const Eigen::Vector3d p = model.gripper_offset;
  // Parallel-axis contribution of a point mass at the gripper center.
  const Eigen::Vector3d new_com = (link.mass * link.com + mass * p) / (link.mass + mass);
  Eigen::Matrix3d inertia_about_origin = link.inertia.asDiagonal().toDenseMatrix();
  const auto shift = [](double m, const Eigen::Vector3d& r) {
    return m * (r.squaredNorm() * Eigen::Matrix3d::Identity() - r * r.transpose());
  };
  inertia_about_origin += shift(link.mass, link.com) + shift(mass, p);
  const Eigen::Matrix3d about_new_com =
      inertia_about_origin - shift(link.mass + mass, new_com);
  link.inertia = about_new_com.diagonal();
  link.mass += mass;
  link.com = new_com;
  return out;
}

}  // namespace throwsim
