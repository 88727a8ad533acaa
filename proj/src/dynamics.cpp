#include "throwsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace throwsim {

namespace {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Vector6d;
using Mat6 = Matrix6d;

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Plucker transform parent -> child: E maps parent coords to child coords,
// r is the child origin expressed in parent coords. Spatial vectors are
// stacked [angular; linear].
struct Xform {
  Mat3 E;
  Vec3 r;

  Vec6 apply_motion(const Vec6& v) const {
    Vec6 out;
    const Vec3 w = v.head<3>();
    out.head<3>() = E * w;
    out.tail<3>() = E * (v.tail<3>() - r.cross(w));
    return out;
  }

  // f_parent = X^T f_child
  Vec6 apply_force_transpose(const Vec6& f) const {
    Vec6 out;
    const Vec3 ft = E.transpose() * f.tail<3>();
    out.head<3>() = E.transpose() * f.head<3>() + r.cross(ft);
    out.tail<3>() = ft;
    return out;
  }

  Mat6 motion_matrix() const {
    Mat6 X = Mat6::Zero();
    X.topLeftCorner<3, 3>() = E;
    X.bottomRightCorner<3, 3>() = E;
    X.bottomLeftCorner<3, 3>() = -E * skew(r);
    return X;
  }
};

Vec6 cross_motion(const Vec6& v, const Vec6& u) {
  Vec6 out;
  const Vec3 w = v.head<3>(), vl = v.tail<3>();
  out.head<3>() = w.cross(u.head<3>());
  out.tail<3>() = w.cross(u.tail<3>()) + vl.cross(u.head<3>());
  return out;
}

Vec6 cross_force(const Vec6& v, const Vec6& f) {
  Vec6 out;
  const Vec3 w = v.head<3>(), vl = v.tail<3>();
  out.head<3>() = w.cross(f.head<3>()) + vl.cross(f.tail<3>());
  out.tail<3>() = w.cross(f.tail<3>());
  return out;
}

struct BodyInertia {
  double m;
  Vec3 h;    // m * com
  Mat3 Io;   // inertia about the link frame origin

  static BodyInertia from_link(const LinkSpec& link) {
    BodyInertia b;
    b.m = link.mass;
    b.h = link.mass * link.com;
    const Mat3 cx = skew(link.com);
    b.Io = link.inertia.asDiagonal().toDenseMatrix() + link.mass * cx * cx.transpose();
    return b;
  }

  Vec6 apply(const Vec6& v) const {
    Vec6 f;
    const Vec3 w = v.head<3>(), vl = v.tail<3>();
    f.head<3>() = Io * w + h.cross(vl);
    f.tail<3>() = m * vl - h.cross(w);
    return f;
  }

  Mat6 matrix() const {
    Mat6 I = Mat6::Zero();
    I.topLeftCorner<3, 3>() = Io;
    I.topRightCorner<3, 3>() = skew(h);
    I.bottomLeftCorner<3, 3>() = -skew(h);
    I.bottomRightCorner<3, 3>() = m * Mat3::Identity();
    return I;
  }
};

struct JointKinematics {
  Xform X;   // parent -> child
  Vec6 S;    // motion subspace in child coords
};

JointKinematics joint_kinematics(const JointSpec& joint, double q) {
  JointKinematics jk;
  if (joint.type == JointType::Revolute) {
    jk.X.E = Eigen::AngleAxisd(q, joint.axis).toRotationMatrix().transpose();
    jk.X.r = joint.offset;
    jk.S.head<3>() = joint.axis;
    jk.S.tail<3>().setZero();
  } else {
    jk.X.E.setIdentity();
    jk.X.r = joint.offset + q * joint.axis;
    jk.S.head<3>().setZero();
    jk.S.tail<3>() = joint.axis;
  }
  return jk;
}

// Closest-distance between segments [p1,q1] and [p2,q2] (Ericson, RTCD 5.1.9).
double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  constexpr double kEps = 1e-12;
  if (a <= kEps && e <= kEps) {
    return r.norm();
  }
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      if (denom > kEps) {
        s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      }
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

}  // namespace

ChainPoses chain_poses(const MachineModel& model, const Vector6d& q) {
  ChainPoses poses;
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();
  for (int i = 0; i < kNumJoints; ++i) {
    const JointSpec& joint = model.joints[i];
    p += R * joint.offset;
    if (joint.type == JointType::Revolute) {
      R = R * Eigen::AngleAxisd(q[i], joint.axis).toRotationMatrix();
    } else {
      p += R * (q[i] * joint.axis);
    }
    poses.rotation[i] = R;
    poses.origin[i] = p;
  }
  return poses;
}

GripperPose forward_kinematics(const MachineModel& model, const Vector6d& q) {
  const ChainPoses poses = chain_poses(model, q);
  GripperPose out;
  out.rotation = poses.rotation[kNumJoints - 1];
  out.position = poses.origin[kNumJoints - 1] + out.rotation * model.gripper_offset;
  return out;
}

Eigen::Matrix<double, 3, 6> gripper_jacobian(const MachineModel& model, const Vector6d& q) {
  const ChainPoses poses = chain_poses(model, q);
  const Vec3 p_ee =
      poses.origin[kNumJoints - 1] + poses.rotation[kNumJoints - 1] * model.gripper_offset;
  Eigen::Matrix<double, 3, 6> J;
  Mat3 R_parent = Mat3::Identity();
  Vec3 p_parent = Vec3::Zero();
  for (int i = 0; i < kNumJoints; ++i) {
    const JointSpec& joint = model.joints[i];
    const Vec3 joint_origin = p_parent + R_parent * joint.offset;
    const Vec3 axis_w = R_parent * joint.axis;
    if (joint.type == JointType::Revolute) {
      J.col(i) = axis_w.cross(p_ee - joint_origin);
    } else {
      J.col(i) = axis_w;
    }
    R_parent = poses.rotation[i];
    p_parent = poses.origin[i];
  }
  return J;
}

Eigen::Vector3d gripper_velocity(const MachineModel& model, const Vector6d& q,
                                 const Vector6d& dq) {
  return gripper_jacobian(model, q) * dq;
}

Matrix6d mass_matrix(const MachineModel& model, const Vector6d& q) {
  std::array<JointKinematics, kNumJoints> jk;
  std::array<Mat6, kNumJoints> X;
  std::array<Mat6, kNumJoints> IC;
  for (int i = 0; i < kNumJoints; ++i) {
    jk[i] = joint_kinematics(model.joints[i], q[i]);
    X[i] = jk[i].X.motion_matrix();
    IC[i] = BodyInertia::from_link(model.links[i]).matrix();
  }
  Mat6 H = Mat6::Zero();
  for (int i = kNumJoints - 1; i >= 0; --i) {
    if (i > 0) IC[i - 1] += X[i].transpose() * IC[i] * X[i];
    Vec6 F = IC[i] * jk[i].S;
    H(i, i) = jk[i].S.dot(F);
    for (int j = i; j > 0;) {
      F = jk[j].X.apply_force_transpose(F);
      --j;
      H(i, j) = H(j, i) = F.dot(jk[j].S);
    }
  }
  return H;
}

Vector6d inverse_dynamics(const MachineModel& model, const Vector6d& q, const Vector6d& dq,
                          const Vector6d& ddq) {
  std::array<JointKinematics, kNumJoints> jk;
  std::array<Vec6, kNumJoints> v, a, f;
  Vec6 a_base = Vec6::Zero();
  a_base.tail<3>() = Vec3(0, 0, model.gravity);  // -gravity trick
  for (int i = 0; i < kNumJoints; ++i) {
    jk[i] = joint_kinematics(model.joints[i], q[i]);
    const Vec6 vj = jk[i].S * dq[i];
    if (i == 0) {
      v[i] = vj;
      a[i] = jk[i].X.apply_motion(a_base) + jk[i].S * ddq[i];
    } else {
      v[i] = jk[i].X.apply_motion(v[i - 1]) + vj;
      a[i] = jk[i].X.apply_motion(a[i - 1]) + jk[i].S * ddq[i] + cross_motion(v[i], vj);
    }
    const BodyInertia I = BodyInertia::from_link(model.links[i]);
    f[i] = I.apply(a[i]) + cross_force(v[i], I.apply(v[i]));
  }
  Vec6 tau;
  for (int i = kNumJoints - 1; i >= 0; --i) {
    tau[i] = jk[i].S.dot(f[i]);
    if (i > 0) f[i - 1] += jk[i].X.apply_force_transpose(f[i]);
  }
  return tau;
}

Vector6d bias_forces(const MachineModel& model, const Vector6d& q, const Vector6d& dq) {
  return inverse_dynamics(model, q, dq, Vector6d::Zero());
}

void DynamicsContext::compute(const MachineModel& model, const Vector6d& q, const Vector6d& dq) {
  mass = mass_matrix(model, q);
  bias = bias_forces(model, q, dq);
  mass_ldlt.compute(mass);
}

Vector6d forward_dynamics(const MachineModel& model, const Vector6d& q, const Vector6d& dq,
                          const Vector6d& tau) {
  DynamicsContext ctx;
  ctx.compute(model, q, dq);
  const Vector6d ddq = ctx.mass_ldlt.solve(tau - ctx.bias);
  if (!ddq.allFinite()) {
    throw std::runtime_error("forward_dynamics: singular mass matrix");
  }
  return ddq;
}

void hybrid_dynamics_general(const MachineModel& model, const Vector6d& q, const Vector6d& dq,
                             const std::array<bool, kNumJoints>& actuated,
                             const Vector6d& ddq_des, const Vector6d& tau_in, Vector6d* tau_out,
                             Vector6d* ddq_out) {
  DynamicsContext ctx;
  ctx.compute(model, q, dq);

  std::vector<int> act, pas;
  for (int i = 0; i < kNumJoints; ++i) (actuated[i] ? act : pas).push_back(i);

  Vector6d ddq = Vector6d::Zero();
  for (int i : act) ddq[i] = ddq_des[i];

  if (!pas.empty()) {
    const int np = static_cast<int>(pas.size());
    Eigen::MatrixXd Mpp(np, np);
    Eigen::VectorXd rhs(np);
    for (int a = 0; a < np; ++a) {
      rhs[a] = tau_in[pas[a]] - ctx.bias[pas[a]];
      for (int b = 0; b < np; ++b) Mpp(a, b) = ctx.mass(pas[a], pas[b]);
      for (int i : act) rhs[a] -= ctx.mass(pas[a], i) * ddq_des[i];
    }
    const Eigen::VectorXd ddq_p = Mpp.ldlt().solve(rhs);
    if (!ddq_p.allFinite()) {
      throw std::runtime_error("hybrid_dynamics: singular passive inertia block");
    }
    for (int a = 0; a < np; ++a) ddq[pas[a]] = ddq_p[a];
  }

  const Vector6d tau_full = ctx.mass * ddq + ctx.bias;
  Vector6d tau = tau_in;
  for (int i : act) tau[i] = tau_full[i];
  if (tau_out) *tau_out = tau;
  if (ddq_out) *ddq_out = ddq;
}

HybridResult hybrid_dynamics(const MachineModel& model, const Vector6d& q, const Vector6d& dq,
                             const Eigen::Vector4d& ddq_des_actuated,
                             const Eigen::Vector2d& tau_passive) {
  std::array<bool, kNumJoints> actuated{true, true, true, true, false, false};
  Vector6d ddq_des = Vector6d::Zero(), tau_in = Vector6d::Zero();
  ddq_des.head<4>() = ddq_des_actuated;
  tau_in.tail<2>() = tau_passive;
  Vector6d tau, ddq;
  hybrid_dynamics_general(model, q, dq, actuated, ddq_des, tau_in, &tau, &ddq);
  HybridResult out;
  out.tau_actuated = tau.head<4>();
  out.ddq_passive = ddq.tail<2>();
  return out;
}

double friction_accel(const FrictionParams& params, double dtheta) {
  if (dtheta == 0.0) return 0.0;
  const double mag = params.upsilon * std::abs(dtheta) + params.eta;
  return dtheta > 0.0 ? -mag : mag;
}

Eigen::Vector2d passive_friction_torque(const Matrix6d& mass, const Vector6d& dq,
                                        const FrictionParams& params, double dt) {
  Eigen::Vector2d tau;
  for (int k = 0; k < kNumPassive; ++k) {
    const int i = kNumActuated + k;
    double accel = friction_accel(params, dq[i]);
    if (dt > 0.0) {
      const double limit = std::abs(dq[i]) / dt;
      accel = std::clamp(accel, -limit, limit);
    }
    tau[k] = mass(i, i) * accel;
  }
  return tau;
}

IntegrateResult integrate_step(const MachineModel& model, const MachineState& state,
                               const Vector6d& ddq, double dt) {
  IntegrateResult out;
  out.state = state;
  out.state.dq += ddq * dt;
  out.state.q += out.state.dq * dt;
  out.state.time += dt;
  for (int i = 0; i < kNumJoints; ++i) {
    const JointSpec& joint = model.joints[i];
    if (out.state.q[i] <= joint.pos_min) {
      out.state.q[i] = joint.pos_min;
      out.state.dq[i] = 0.0;
      out.clamped[i] = dt > 0.0;
    } else if (out.state.q[i] >= joint.pos_max) {
      out.state.q[i] = joint.pos_max;
      out.state.dq[i] = 0.0;
      out.clamped[i] = dt > 0.0;
    }
  }
  return out;
}

CollisionFlags check_collision(const MachineModel& model, const Vector6d& q) {
  const ChainPoses poses = chain_poses(model, q);
  std::array<Vec3, kNumJoints> a, b;
  for (int i = 0; i < kNumJoints; ++i) {
    a[i] = poses.origin[i] + poses.rotation[i] * model.links[i].capsule_a;
    b[i] = poses.origin[i] + poses.rotation[i] * model.links[i].capsule_b;
  }
  const Vec3 gripper =
      poses.origin[kNumJoints - 1] + poses.rotation[kNumJoints - 1] * model.gripper_offset;

  CollisionFlags flags;

  // Ground: arm capsules (boom onward) and the gripper center.
  for (int i = 1; i < kNumJoints; ++i) {
    if (std::min(a[i].z(), b[i].z()) < model.links[i].capsule_radius) {
      flags.ground_collision = true;
      break;
    }
  }
  if (gripper.z() < 0.0) flags.ground_collision = true;

  // Self: boom against the distal links; the cabin clearance volume (vertical
  // capsule) against everything from the dipper outward. Nested-at-rest
  // neighbor pairs are not checked.
  const int boom = 1;
  for (int j = 3; j < kNumJoints && !flags.self_collision; ++j) {
    const double d = segment_segment_distance(a[boom], b[boom], a[j], b[j]);
    if (d < model.links[boom].capsule_radius + model.links[j].capsule_radius) {
      flags.self_collision = true;
    }
  }
  const Vec3 cab_a(0, 0, 0), cab_b(0, 0, model.cabin_height);
  for (int j = 2; j < kNumJoints && !flags.self_collision; ++j) {
    const double d = segment_segment_distance(cab_a, cab_b, a[j], b[j]);
    if (d < model.cabin_radius + model.links[j].capsule_radius) {
      flags.self_collision = true;
    }
  }
  return flags;
}

double total_energy(const MachineModel& model, const Vector6d& q, const Vector6d& dq) {
  const double kinetic = 0.5 * dq.dot(mass_matrix(model, q) * dq);
  double potential = 0.0;
  const ChainPoses poses = chain_poses(model, q);
  for (int i = 0; i < kNumJoints; ++i) {
    const Vec3 com_w = poses.origin[i] + poses.rotation[i] * model.links[i].com;
    potential += model.links[i].mass * model.gravity * com_w.z();
  }
  return kinetic + potential;
}

}  // namespace throwsim
