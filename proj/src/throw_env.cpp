#include "throwsim/throw_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace throwsim {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

BallState step_payload(const BallState& ball, double dt, double gravity) {
  BallState out = ball;
  if (!ball.released || ball.impacted || dt <= 0.0) return out;

  const Eigen::Vector3d& p = ball.position;
  const Eigen::Vector3d& v = ball.velocity;
  Eigen::Vector3d p_next = p + v * dt - Eigen::Vector3d(0, 0, 0.5 * gravity * dt * dt);

  if (p_next.z() > 0.0) {
    out.position = p_next;
    out.velocity = v - Eigen::Vector3d(0, 0, gravity * dt);
    return out;
  }

  // Ground crossing inside this step: solve 0.5 g t^2 - vz t - pz = 0.
  double t_impact = dt;
  if (gravity > 0.0) {
    const double disc = v.z() * v.z() + 2.0 * gravity * std::max(0.0, p.z());
    t_impact = (v.z() + std::sqrt(std::max(0.0, disc))) / gravity;
  } else if (v.z() < 0.0) {
    t_impact = p.z() / -v.z();
  }
  t_impact = std::clamp(t_impact, 0.0, dt);

  Eigen::Vector3d impact =
      p + v * t_impact - Eigen::Vector3d(0, 0, 0.5 * gravity * t_impact * t_impact);
  impact.z() = 0.0;
  out.position = impact;
  out.impact_point = impact;
  out.velocity = v - Eigen::Vector3d(0, 0, gravity * t_impact);
  out.impacted = true;
  return out;
}

RewardTerms compute_reward(const RewardWeights& w, double best_err2d, double best_err3d,
                           double err2d, double err3d, const Eigen::VectorXd& action,
                           const Eigen::VectorXd& prev_action, bool opened,
                           Termination termination) {
  RewardTerms t;
  t.delta_err = std::max(0.0, best_err2d - err2d) + std::max(0.0, best_err3d - err3d);
  t.err3d = std::exp(-w.b1 * err3d * err3d);
  t.act_diff = (action - prev_action).squaredNorm();
  t.act = opened ? action.squaredNorm() : 0.0;
  if (termination == Termination::Collided || termination == Termination::Limits) {
    t.termination = w.p_term;
  } else if (termination == Termination::Landed) {
    t.termination = w.w_term * std::exp(-w.b2 * err3d * err3d);
  }
  t.total = w.c1 * t.delta_err + w.c2 * t.err3d - w.c3 * t.act_diff - w.c4 * t.act + t.termination;
  return t;
}

ThrowTarget sample_target(Rng& rng, const MachineModel& model, const EnvConfig& cfg) {
  ThrowTarget target;
  double radius = 0.0;
  double heading = cfg.fixed_target_heading;
  if (cfg.fixed_target) {
    radius = cfg.fixed_target_distance;
  } else {
    radius = rng.uniform(cfg.target_min_factor * model.max_reach,
                         cfg.target_max_factor * model.max_reach);
    if (!cfg.planar) heading = rng.uniform(-kPi, kPi);
  }
  target.position = Eigen::Vector3d(radius * std::cos(heading), radius * std::sin(heading), 0.0);
  return target;
}

ThrowEnv::ThrowEnv(const MachineModel& model, const EnvConfig& cfg, std::uint64_t seed)
    : model_(model), model_loaded_(with_payload(model, model.payload_mass)), cfg_(cfg),
      rng_(seed) {
  obs_dim_ = cfg_.planar ? 56 : 65;
  act_dim_ = cfg_.planar ? 4 : 5;
  for (int i = 0; i < kNumActuated; ++i) vel_limits_[i] = model_.joints[i].vel_limit;
  if (cfg_.torque_limit_scale > 0.0) {
    torque_limits_ = default_torque_limits(model_loaded_, cfg_.torque_limit_scale);
  }
  command_ = Eigen::VectorXd::Zero(act_dim_);
  observation_.resize(obs_dim_);
  reset();
}

const Eigen::VectorXd& ThrowEnv::reset() {
  target_ = sample_target(rng_, model_, cfg_);

  friction_ = model_.friction;
  if (cfg_.friction_scale_min != 1.0 || cfg_.friction_scale_max != 1.0) {
    const double s = rng_.uniform(cfg_.friction_scale_min, cfg_.friction_scale_max);
    friction_.upsilon *= s;
    friction_.eta *= s;
  }

  const double heading = std::atan2(target_.position.y(), target_.position.x());
  bool accepted = false;
  Vector6d q = Vector6d::Zero();
  for (int attempt = 0; attempt < cfg_.reset_max_attempts && !accepted; ++attempt) {
    if (cfg_.randomize_reset) {
      q[0] = cfg_.planar ? heading
                         : rng_.uniform(model_.joints[0].pos_min, model_.joints[0].pos_max);
      for (int i = 1; i < kNumActuated; ++i) {
        q[i] = rng_.uniform(model_.joints[i].pos_min, model_.joints[i].pos_max);
      }
    } else {
      // Canonical raised pose for non-randomized evaluation.
      q << (cfg_.planar ? heading : 0.0), -0.5, 0.9, 0.2, 0.0, 0.0;
    }
    q[4] = -(q[1] + q[2]);  // tool aligned with gravity
    q[5] = 0.0;
    if (q[4] < model_.joints[4].pos_min || q[4] > model_.joints[4].pos_max) continue;
    const CollisionFlags flags = check_collision(model_, q);
    accepted = !flags.self_collision && !flags.ground_collision;
  }
  if (!accepted) {
    throw std::runtime_error("ThrowEnv::reset: no collision-free configuration found");
  }

  state_ = MachineState{};
  state_.q = q;
  state_.payload_attached = model_.payload_mass > 0.0;
  ball_ = BallState{};
  delay_ = DelayLine(cfg_.delay_mean, cfg_.delay_std, cfg_.delay_randomize, cfg_.sim_dt);
  pid_.reset();
  substep_count_ = 0;
  release_control_step_ = -1;
  spawn_count_ = 0;
  pending_release_event_ = false;
  impact_traced_ = false;
  trace_rows_.clear();

  progress_ = EpisodeProgress{};
  progress_.prev_command = Eigen::VectorXd::Zero(act_dim_);
  const GripperPose pose = forward_kinematics(active_model(), q);
  progress_.best_err2d = (pose.position - target_.position).head<2>().norm();
  progress_.best_err3d = (pose.position - target_.position).norm();

  q_history_.fill(state_.q);
  dq_history_.fill(state_.dq);
  command_.setZero();
  last_reward_ = RewardTerms{};
  build_observation();
  return observation_;
}

const MachineModel& ThrowEnv::active_model() const {
  return state_.payload_attached ? model_loaded_ : model_;
}

void ThrowEnv::spawn_ball() {
  const GripperPose pose = forward_kinematics(active_model(), state_.q);
  ball_.released = true;
  ball_.position = pose.position;
  ball_.velocity = gripper_velocity(active_model(), state_.q, state_.dq);
  state_.payload_attached = false;
  ++spawn_count_;
  pending_release_event_ = true;
}

void ThrowEnv::apply_action(const Eigen::VectorXd& action) {
  if (action.size() != act_dim_) {
    throw std::invalid_argument("ThrowEnv::step: action size mismatch");
  }
  const int n_vel = act_dim_ - 1;
  for (int i = 0; i < n_vel; ++i) command_[i] = std::clamp(action[i], -1.0, 1.0);

  double release_cmd = 0.5 * (1.0 + std::tanh(action[n_vel]));
  if (!progress_.opened && cfg_.assist_enabled) {
    const GripperPose pose = forward_kinematics(active_model(), state_.q);
    const double dist = (pose.position - target_.position).norm();
    if (dist < cfg_.assist_distance) {
      const double speed = gripper_velocity(active_model(), state_.q, state_.dq).norm();
      if (speed < cfg_.assist_speed && rng_.uniform() < cfg_.assist_probability) {
        release_cmd = 1.0;  // overwritten by the constant releasing command
      }
    }
  }
  command_[n_vel] = release_cmd;

  if (!progress_.opened && release_cmd > cfg_.release_threshold) {
    progress_.opened = true;
    release_control_step_ = progress_.step;
    delay_.arm(substep_count_, rng_);
    if (delay_.poll(substep_count_)) spawn_ball();  // zero-delay configuration
  }

  Eigen::Vector4d dq_ref = Eigen::Vector4d::Zero();
  if (cfg_.planar) {
    for (int i = 0; i < 3; ++i) dq_ref[i + 1] = command_[i] * vel_limits_[i + 1];
  } else {
    for (int i = 0; i < 4; ++i) dq_ref[i] = command_[i] * vel_limits_[i];
  }
  dq_ref_ = randomize_velocity_command(dq_ref, rng_, cfg_.cmd_randomization, vel_limits_);
}

Termination ThrowEnv::substep(const Eigen::Vector4d& dq_ref) {
  const MachineModel& model = active_model();
  const double dt = cfg_.sim_dt;

  DynamicsContext ctx;
  ctx.compute(model, state_.q, state_.dq);
  const Eigen::Vector2d tau_fric = passive_friction_torque(ctx.mass, state_.dq, friction_, dt);

  Eigen::Vector4d tau_act;
  if (cfg_.controller == ControllerKind::Id) {
    tau_act = id_velocity_control(model, ctx, state_, dq_ref, tau_fric, cfg_.id_controller);
  } else {
    tau_act = pid_velocity_control(model, cfg_.pid_gains, pid_, state_, dq_ref, dt);
  }
  if (cfg_.torque_limit_scale > 0.0) tau_act = saturate_torques(tau_act, torque_limits_);

  Vector6d tau;
  tau << tau_act, tau_fric;
  Vector6d ddq = ctx.mass_ldlt.solve(tau - ctx.bias);

  // Friction may decelerate a passive joint to rest but never through it:
  // compare against the frictionless solution and snap overshoots to zero.
  if ((tau_fric.array() != 0.0).any()) {
    Vector6d tau_nf = tau;
    tau_nf.tail<2>().setZero();
    const Vector6d ddq_nf = ctx.mass_ldlt.solve(tau_nf - ctx.bias);
    for (int k = 0; k < kNumPassive; ++k) {
      const int i = kNumActuated + k;
      const double v_f = state_.dq[i] + ddq[i] * dt;
      const double v_nf = state_.dq[i] + ddq_nf[i] * dt;
      if (v_f * v_nf < 0.0) ddq[i] = -state_.dq[i] / dt;
    }
  }

  if (!ddq.allFinite()) return Termination::Collided;

  const IntegrateResult integrated = integrate_step(model, state_, ddq, dt);
  state_ = integrated.state;
  ++substep_count_;

  if (ball_.released && !ball_.impacted) ball_ = step_payload(ball_, dt, model_.gravity);
  if (delay_.poll(substep_count_)) spawn_ball();

  if (trace_) {
    TraceRow row;
    row.time = state_.time;
    row.q = state_.q;
    row.dq = state_.dq;
    row.command = command_;
    row.ball = ball_;
    row.release_event = pending_release_event_;
    row.impact_event = ball_.impacted && !impact_traced_;
    if (row.impact_event) impact_traced_ = true;
    pending_release_event_ = false;
    trace_rows_.push_back(row);
  }
  pending_release_event_ = false;

  if (!state_.q.allFinite() || !state_.dq.allFinite()) return Termination::Collided;
  const CollisionFlags flags = check_collision(model, state_.q);
  if (flags.self_collision || flags.ground_collision) return Termination::Collided;
  for (int i = 0; i < kNumJoints; ++i) {
    if (integrated.clamped[i]) return Termination::Limits;
  }
  if (ball_.impacted) return Termination::Landed;
  return Termination::Running;
}

Eigen::Vector3d ThrowEnv::proxy_position() const {
  if (!ball_.released) return forward_kinematics(active_model(), state_.q).position;
  return ball_.impacted ? ball_.impact_point : ball_.position;
}

ThrowEnv::StepResult ThrowEnv::step(const Eigen::VectorXd& action) {
  trace_rows_.clear();
  apply_action(action);

  Termination outcome = Termination::Running;
  for (int s = 0; s < cfg_.decimation && outcome == Termination::Running; ++s) {
    outcome = substep(dq_ref_);
  }
  ++progress_.step;
  if (outcome == Termination::Running && progress_.step >= cfg_.max_steps) {
    outcome = Termination::Timeout;
  }

  const Eigen::Vector3d proxy = proxy_position();
  const double err2d = (proxy - target_.position).head<2>().norm();
  const double err3d = (proxy - target_.position).norm();

  last_reward_ = compute_reward(cfg_.reward, progress_.best_err2d, progress_.best_err3d, err2d,
                                err3d, command_, progress_.prev_command, progress_.opened,
                                outcome);
  progress_.best_err2d = std::min(progress_.best_err2d, err2d);
  progress_.best_err3d = std::min(progress_.best_err3d, err3d);
  progress_.prev_command = command_;

  push_history();
  build_observation();

  if (trace_ && !trace_rows_.empty()) {
    trace_rows_.back().reward = last_reward_;
    trace_rows_.back().control_boundary = true;
    for (const TraceRow& row : trace_rows_) trace_->append(row);
    trace_rows_.clear();
  }

  StepResult result;
  result.reward = last_reward_.total;
  result.termination = outcome;
  result.done = outcome != Termination::Running;
  return result;
}

void ThrowEnv::push_history() {
  for (int h = kHistoryDepth - 1; h > 0; --h) {
    q_history_[h] = q_history_[h - 1];
    dq_history_[h] = dq_history_[h - 1];
  }
  q_history_[0] = state_.q;
  dq_history_[0] = state_.dq;
}

void ThrowEnv::build_observation() {
  const bool noisy = cfg_.noise.active();
  auto jitter = [&](double value, double std) {
    return (noisy && std > 0.0) ? value + rng_.normal(0.0, std) : value;
  };

  int idx = 0;
  const int j_begin = cfg_.planar ? 1 : 0;
  for (int h = 0; h < kHistoryDepth; ++h) {
    for (int j = j_begin; j < kNumJoints; ++j) {
      observation_[idx++] = jitter(q_history_[h][j], cfg_.noise.q);
    }
  }
  for (int h = 0; h < kHistoryDepth; ++h) {
    for (int j = j_begin; j < kNumJoints; ++j) {
      observation_[idx++] = jitter(dq_history_[h][j], cfg_.noise.dq);
    }
  }
  for (int i = 0; i < act_dim_; ++i) observation_[idx++] = progress_.prev_command[i];

  const GripperPose pose = forward_kinematics(active_model(), state_.q);
  const Eigen::Vector3d vel = gripper_velocity(active_model(), state_.q, state_.dq);
  for (int i = 0; i < 3; ++i) observation_[idx++] = jitter(pose.position[i], cfg_.noise.r_ee);
  for (int i = 0; i < 3; ++i) observation_[idx++] = jitter(vel[i], cfg_.noise.dr_ee);

  const Eigen::Vector3d proxy = proxy_position();
  observation_[idx++] = jitter((proxy - target_.position).head<2>().norm(), cfg_.noise.err);
  observation_[idx++] = jitter((proxy - target_.position).norm(), cfg_.noise.err);
  for (int i = 0; i < 3; ++i) observation_[idx++] = target_.position[i];
  observation_[idx++] = progress_.opened ? 1.0 : 0.0;

  if (idx != obs_dim_) throw std::logic_error("observation layout mismatch");
}

ThrowVecEnv::ThrowVecEnv(const MachineModel& model, const EnvConfig& cfg, int n_envs,
                         std::uint64_t seed) {
  control_dt_ = cfg.sim_dt * cfg.decimation;
  envs_.reserve(n_envs);
  for (int i = 0; i < n_envs; ++i) {
    envs_.emplace_back(model, cfg, derive_seed(seed, static_cast<std::uint64_t>(i)));
  }
  return_acc_.assign(n_envs, 0.0);
  length_acc_.assign(n_envs, 0);
  pending_.assign(n_envs, EpisodeStats{});
}

void ThrowVecEnv::reset_all(Eigen::MatrixXd& obs) {
  obs.resize(observation_size(), num_envs());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < num_envs(); ++i) {
    obs.col(i) = envs_[i].reset();
  }
  std::fill(return_acc_.begin(), return_acc_.end(), 0.0);
  std::fill(length_acc_.begin(), length_acc_.end(), 0);
}

void ThrowVecEnv::step(const Eigen::MatrixXd& actions, StepData& out) {
  const int n = num_envs();
  out.resize(observation_size(), n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    ThrowEnv& env = envs_[i];
    const ThrowEnv::StepResult res = env.step(actions.col(i));
    out.reward[i] = res.reward;
    out.done[i] = res.done ? 1 : 0;
    out.timeout[i] = res.termination == Termination::Timeout ? 1 : 0;
    return_acc_[i] += res.reward;
    length_acc_[i] += 1;
    if (res.done) {
      out.terminal_obs.col(i) = env.observation();
      EpisodeStats& stats = pending_[i];
      stats.episodes += 1;
      stats.return_sum += return_acc_[i];
      stats.length_sum += length_acc_[i];
      if (res.termination == Termination::Landed) {
        stats.landed += 1;
        stats.landing_err_sum += (env.ball().impact_point - env.target().position).norm();
      }
      return_acc_[i] = 0.0;
      length_acc_[i] = 0;
      out.obs.col(i) = env.reset();
    } else {
      out.obs.col(i) = env.observation();
      out.terminal_obs.col(i).setZero();
    }
  }
}

BatchEnv::EpisodeStats ThrowVecEnv::drain_stats() {
  EpisodeStats total;
  for (EpisodeStats& stats : pending_) {
    total.episodes += stats.episodes;
    total.return_sum += stats.return_sum;
    total.length_sum += stats.length_sum;
    total.landed += stats.landed;
    total.landing_err_sum += stats.landing_err_sum;
    stats = EpisodeStats{};
  }
  return total;
}

}  // namespace throwsim
