#pragma once

#include <cstdint>

#include "throwsim/dynamics.hpp"
#include "throwsim/rng.hpp"

namespace throwsim {

// 3x the worst-case static gravity torque per actuated joint (coarse grid over
// the actuated range); used as the default saturation bound.
Eigen::Vector4d default_torque_limits(const MachineModel& model, double scale = 3.0);

Eigen::Vector4d saturate_torques(const Eigen::Vector4d& tau, const Eigen::Vector4d& limits);

// Computed-torque joint velocity controller used in training: requests
// ddq_des = gain * (dq_ref - dq) on the actuated joints and solves the hybrid
// dynamics with friction torque on the passive joints.
struct IdControllerConfig {
  double gain = 16.0;  // [1/s]
};

Eigen::Vector4d id_velocity_control(const MachineModel& model, const DynamicsContext& ctx,
                                    const MachineState& state, const Eigen::Vector4d& dq_ref,
                                    const Eigen::Vector2d& tau_passive,
                                    const IdControllerConfig& cfg);
// Convenience overload matching the documented operation signature.
Eigen::Vector4d id_velocity_control(const MachineModel& model, const MachineState& state,
                                    const Eigen::Vector4d& dq_ref, const FrictionParams& friction,
                                    const IdControllerConfig& cfg, double dt = 0.01);

// PID joint velocity controller with gravity feedforward, used for the
// evaluation simulator.
struct PidGains {
  Eigen::Vector4d kp = Eigen::Vector4d::Zero();
  Eigen::Vector4d ki = Eigen::Vector4d::Zero();
  Eigen::Vector4d kd = Eigen::Vector4d::Zero();
  Eigen::Vector4d integral_clamp = Eigen::Vector4d::Zero();
  bool gravity_ff = true;
};

struct PidState {
  Eigen::Vector4d integral = Eigen::Vector4d::Zero();
  Eigen::Vector4d prev_error = Eigen::Vector4d::Zero();
  bool has_prev = false;
  void reset() { *this = PidState{}; }
};

Eigen::Vector4d pid_velocity_control(const MachineModel& model, const PidGains& gains,
                                     PidState& pid, const MachineState& state,
                                     const Eigen::Vector4d& dq_ref, double dt);

// Gripper release delay: armed once per episode, fires once after
// round(delay/dt) simulator steps. Randomized mode draws the delay from a
// normal truncated at +-3 sigma.
class DelayLine {
 public:
  DelayLine() = default;
  DelayLine(double mean_s, double std_s, bool randomize, double dt)
      : mean_(mean_s), std_(std_s), randomize_(randomize), dt_(dt) {}

  void reset() {
    armed_ = false;
    delivered_ = false;
  }

  // Registers the release at simulator step `now`; repeated calls are ignored.
  // Returns true if this call armed the line.
  bool arm(std::uint64_t now, Rng& rng) {
    if (armed_ || delivered_) return false;
    const double delay = randomize_ ? rng.truncated_normal(mean_, std_, 3.0) : mean_;
    effective_step_ = now + static_cast<std::uint64_t>(std::llround(std::max(0.0, delay) / dt_));
    armed_ = true;
    return true;
  }

  // True exactly once, at the first poll with step >= trigger + delay steps.
  bool poll(std::uint64_t now) {
    if (!armed_ || delivered_ || now < effective_step_) return false;
    delivered_ = true;
    return true;
  }

  bool armed() const { return armed_; }
  bool delivered() const { return delivered_; }
  std::uint64_t effective_step() const { return effective_step_; }

 private:
  double mean_ = 0.258;
  double std_ = 0.015;
  bool randomize_ = false;
  double dt_ = 0.01;
  bool armed_ = false;
  bool delivered_ = false;
  std::uint64_t effective_step_ = 0;
};

// Training-time command randomization: per-joint multiplicative scale in
// [scale_min, scale_max] plus additive Gaussian noise, clamped to the joint
// velocity limits. Degenerate configuration is an exact identity.
struct CommandRandomization {
  double scale_min = 1.0;
  double scale_max = 1.0;
  double additive_std = 0.0;  // absolute, same units as the command

  bool active() const { return scale_min != 1.0 || scale_max != 1.0 || additive_std != 0.0; }
};

Eigen::Vector4d randomize_velocity_command(const Eigen::Vector4d& cmd, Rng& rng,
                                           const CommandRandomization& cfg,
                                           const Eigen::Vector4d& vel_limits);

}  // namespace throwsim
