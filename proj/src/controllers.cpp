#include "throwsim/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace throwsim {

Eigen::Vector4d default_torque_limits(const MachineModel& model, double scale) {
  Eigen::Vector4d worst = Eigen::Vector4d::Zero();
  const int n = 9;
  Vector6d q = Vector6d::Zero();
  for (int i = 0; i < n; ++i) {
    q[1] = model.joints[1].pos_min +
           (model.joints[1].pos_max - model.joints[1].pos_min) * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      q[2] = model.joints[2].pos_min +
             (model.joints[2].pos_max - model.joints[2].pos_min) * j / (n - 1);
      for (int k = 0; k < 5; ++k) {
        q[3] = model.joints[3].pos_min +
               (model.joints[3].pos_max - model.joints[3].pos_min) * k / 4;
        q[4] = std::clamp(-(q[1] + q[2]), model.joints[4].pos_min, model.joints[4].pos_max);
        const Vector6d g = bias_forces(model, q, Vector6d::Zero());
        worst = worst.cwiseMax(g.head<4>().cwiseAbs());
      }
    }
  }
  return scale * worst;
}

Eigen::Vector4d saturate_torques(const Eigen::Vector4d& tau, const Eigen::Vector4d& limits) {
  if (limits.isZero()) return tau;
  return tau.cwiseMin(limits).cwiseMax(-limits);
}

Eigen::Vector4d id_velocity_control(const MachineModel& model, const DynamicsContext& ctx,
                                    const MachineState& state, const Eigen::Vector4d& dq_ref,
                                    const Eigen::Vector2d& tau_passive,
                                    const IdControllerConfig& cfg) {
  const Eigen::Vector4d ddq_des = cfg.gain * (dq_ref - state.dq.head<4>());
  // Partitioned solve on the shared mass matrix / bias.
  const Eigen::Matrix2d Mpp = ctx.mass.block<2, 2>(4, 4);
  const Eigen::Matrix<double, 2, 4> Mpa = ctx.mass.block<2, 4>(4, 0);
  const Eigen::Vector2d rhs = tau_passive - ctx.bias.tail<2>() - Mpa * ddq_des;
  const Eigen::Vector2d ddq_p = Mpp.ldlt().solve(rhs);
  if (!ddq_p.allFinite()) {
    throw std::runtime_error("id_velocity_control: singular passive inertia block");
  }
  Vector6d ddq;
  ddq << ddq_des, ddq_p;
  const Vector6d tau = ctx.mass * ddq + ctx.bias;
  return tau.head<4>();
}

Eigen::Vector4d id_velocity_control(const MachineModel& model, const MachineState& state,
                                    const Eigen::Vector4d& dq_ref, const FrictionParams& friction,
                                    const IdControllerConfig& cfg, double dt) {
  DynamicsContext ctx;
  ctx.compute(model, state.q, state.dq);
  const Eigen::Vector2d tau_p = passive_friction_torque(ctx.mass, state.dq, friction, dt);
  return id_velocity_control(model, ctx, state, dq_ref, tau_p, cfg);
}

Eigen::Vector4d pid_velocity_control(const MachineModel& model, const PidGains& gains,
                                     PidState& pid, const MachineState& state,
                                     const Eigen::Vector4d& dq_ref, double dt) {
  const Eigen::Vector4d error = dq_ref - state.dq.head<4>();
  pid.integral += error * dt;
  pid.integral = pid.integral.cwiseMin(gains.integral_clamp).cwiseMax(-gains.integral_clamp);
  Eigen::Vector4d derivative = Eigen::Vector4d::Zero();
  if (pid.has_prev && dt > 0.0) derivative = (error - pid.prev_error) / dt;
  pid.prev_error = error;
  pid.has_prev = true;

  Eigen::Vector4d tau = gains.kp.cwiseProduct(error) + gains.ki.cwiseProduct(pid.integral) +
                        gains.kd.cwiseProduct(derivative);
  if (gains.gravity_ff) {
    tau += inverse_dynamics(model, state.q, Vector6d::Zero(), Vector6d::Zero()).head<4>();
  }
  return tau;
}

Eigen::Vector4d randomize_velocity_command(const Eigen::Vector4d& cmd, Rng& rng,
                                           const CommandRandomization& cfg,
                                           const Eigen::Vector4d& vel_limits) {
  if (!cfg.active()) return cmd;
  Eigen::Vector4d out;
  for (int i = 0; i < 4; ++i) {
    const double scale = rng.uniform(cfg.scale_min, cfg.scale_max);
    const double noise = cfg.additive_std > 0.0 ? rng.normal(0.0, cfg.additive_std) : 0.0;
    out[i] = std::clamp(cmd[i] * scale + noise, -vel_limits[i], vel_limits[i]);
  }
  return out;
}

}  // namespace throwsim
