#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "throwsim/controllers.hpp"
#include "throwsim/dynamics.hpp"
#include "throwsim/rng.hpp"

namespace throwsim {

enum class ControllerKind { Id, Pid };

enum class Termination { Running, Collided, Limits, Landed, Timeout };

struct ThrowTarget {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // z = 0 (ground)
};

struct BallState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  bool released = false;
  bool impacted = false;
  Eigen::Vector3d impact_point = Eigen::Vector3d::Zero();
};

// Advances a released ball by dt of drag-free flight; detects the ground
// impact inside the step by solving the flight quadratic, freezing the ball
// at the exact z = 0 crossing.
BallState step_payload(const BallState& ball, double dt, double gravity);

struct RewardWeights {
  double c1 = 10.0;   // best-so-far error progress
  double c2 = 1.0;    // proximity shaping exp(-b1 d^2)
  double c3 = 0.05;   // action-rate penalty
  double c4 = 0.01;   // post-release action penalty
  double b1 = 0.5;
  double b2 = 0.5;
  double p_term = -10.0;  // collision / joint-limit termination
  double w_term = 20.0;   // landing bonus scale
};

struct RewardTerms {
  double delta_err = 0.0;
  double err3d = 0.0;
  double act_diff = 0.0;
  double act = 0.0;
  double termination = 0.0;
  double total = 0.0;
};

// Per-step reward. `err*` are the current ball(-proxy) distances to the
// target, `best*` the best-so-far values before this step.
RewardTerms compute_reward(const RewardWeights& w, double best_err2d, double best_err3d,
                           double err2d, double err3d, const Eigen::VectorXd& action,
                           const Eigen::VectorXd& prev_action, bool opened,
                           Termination termination);

struct EpisodeProgress {
  double best_err2d = std::numeric_limits<double>::infinity();
  double best_err3d = std::numeric_limits<double>::infinity();
  bool opened = false;
  int step = 0;
  Eigen::VectorXd prev_command;  // u^{k-1}, normalized units
};

struct ObservationNoise {
  double q = 0.0;
  double dq = 0.0;
  double r_ee = 0.0;
  double dr_ee = 0.0;
  double err = 0.0;

  bool active() const { return q != 0 || dq != 0 || r_ee != 0 || dr_ee != 0 || err != 0; }
};

struct EnvConfig {
  bool planar = false;  // 2D variant: no cabin command, cabin faces the target
  double sim_dt = 0.01;
  int decimation = 8;  // simulator substeps per control step
  int max_steps = 100;

  double target_min_factor = 0.6;   // r_min = factor * r_max
  double target_max_factor = 1.45;  // 45% beyond the static reach
  bool fixed_target = false;
  double fixed_target_distance = 8.5;
  double fixed_target_heading = 0.0;

  double release_threshold = 0.9;
  bool assist_enabled = true;
  double assist_probability = 0.05;
  double assist_distance = 1.5;  // [m]
  double assist_speed = 0.5;     // [m/s]

  RewardWeights reward;
  ObservationNoise noise;
  CommandRandomization cmd_randomization;
  double friction_scale_min = 1.0;  // per-episode domain randomization
  double friction_scale_max = 1.0;

  double delay_mean = 0.258;
  double delay_std = 0.015;
  bool delay_randomize = false;

  ControllerKind controller = ControllerKind::Id;
  IdControllerConfig id_controller;
  PidGains pid_gains;
  double torque_limit_scale = 3.0;  // 0 disables saturation

  int reset_max_attempts = 1000;
  bool randomize_reset = true;  // off: canonical raised pose (evaluation sweeps)
};

inline constexpr int kHistoryDepth = 4;

// Optional per-substep trace sink (drives the rollout CSV export).
struct TraceRow {
  double time = 0.0;
  Vector6d q = Vector6d::Zero();
  Vector6d dq = Vector6d::Zero();
  Eigen::VectorXd command;  // normalized, current control step
  BallState ball;
  RewardTerms reward;  // filled on control-step boundaries
  bool control_boundary = false;
  bool release_event = false;  // ball spawned during this substep
  bool impact_event = false;
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void append(const TraceRow& row) = 0;
};

// Samples a ground-level target uniformly in radius over the throwing
// annulus; heading uniform for the 3D variant, fixed for 2D.
ThrowTarget sample_target(Rng& rng, const MachineModel& model, const EnvConfig& cfg);

class ThrowEnv {
 public:
  ThrowEnv(const MachineModel& model, const EnvConfig& cfg, std::uint64_t seed);

  int observation_size() const { return obs_dim_; }
  int action_size() const { return act_dim_; }

  const Eigen::VectorXd& reset();

  struct StepResult {
    double reward = 0.0;
    Termination termination = Termination::Running;
    bool done = false;
  };

  StepResult step(const Eigen::VectorXd& action);

  const Eigen::VectorXd& observation() const { return observation_; }

  // Introspection (tests, evaluation harness, bindings).
  const MachineState& state() const { return state_; }
  const BallState& ball() const { return ball_; }
  const ThrowTarget& target() const { return target_; }
  const EpisodeProgress& progress() const { return progress_; }
  const MachineModel& model() const { return model_; }
  const EnvConfig& config() const { return cfg_; }
  const RewardTerms& last_reward_terms() const { return last_reward_; }
  int release_control_step() const { return release_control_step_; }
  int spawn_count() const { return spawn_count_; }
  std::uint64_t substeps_elapsed() const { return substep_count_; }
  double time() const { return state_.time; }

  void set_trace(TraceSink* sink) { trace_ = sink; }
  Rng& rng() { return rng_; }

 private:
  const MachineModel& active_model() const;
  void apply_action(const Eigen::VectorXd& action);
  void spawn_ball();
  void push_history();
  void build_observation();
  Termination substep(const Eigen::Vector4d& dq_ref);
  Eigen::Vector3d proxy_position() const;

  MachineModel model_;          // without payload
  MachineModel model_loaded_;   // with the held payload attached
  EnvConfig cfg_;
  Rng rng_;
  int obs_dim_ = 0;
  int act_dim_ = 0;

  MachineState state_;
  BallState ball_;
  ThrowTarget target_;
  EpisodeProgress progress_;
  FrictionParams friction_;  // possibly randomized per episode
  DelayLine delay_;
  PidState pid_;
  Eigen::Vector4d torque_limits_ = Eigen::Vector4d::Zero();
  Eigen::Vector4d vel_limits_ = Eigen::Vector4d::Zero();

  std::array<Vector6d, kHistoryDepth> q_history_;
  std::array<Vector6d, kHistoryDepth> dq_history_;

  Eigen::VectorXd command_;  // current normalized command u^k
  Eigen::Vector4d dq_ref_ = Eigen::Vector4d::Zero();
  Eigen::VectorXd observation_;
  RewardTerms last_reward_;
  std::uint64_t substep_count_ = 0;
  int release_control_step_ = -1;
  int spawn_count_ = 0;
  TraceSink* trace_ = nullptr;
  std::vector<TraceRow> trace_rows_;
  bool pending_release_event_ = false;
  bool impact_traced_ = false;
};

// Batched environment interface consumed by the learner.
class BatchEnv {
 public:
  virtual ~BatchEnv() = default;
  virtual int num_envs() const = 0;
  virtual int observation_size() const = 0;
  virtual int action_size() const = 0;
  // Wall duration of one control step (for experience accounting in logs).
  virtual double step_duration() const { return 0.0; }

  // Episode statistics harvested since the last drain (deterministic order).
  struct EpisodeStats {
    std::int64_t episodes = 0;
    double return_sum = 0.0;
    double length_sum = 0.0;
    std::int64_t landed = 0;
    double landing_err_sum = 0.0;  // 3D impact error over landed episodes
  };
  virtual EpisodeStats drain_stats() { return {}; }

  // Fills one observation column per environment.
  virtual void reset_all(Eigen::MatrixXd& obs) = 0;

  struct StepData {
    Eigen::MatrixXd obs;           // obs_dim x n (post-reset on done)
    Eigen::VectorXd reward;        // n
    Eigen::VectorXi done;          // n, episode ended during this step
    Eigen::VectorXi timeout;       // n, termination was a time limit
    Eigen::MatrixXd terminal_obs;  // obs_dim x n, valid where done != 0
    void resize(int obs_dim, int n) {
      obs.resize(obs_dim, n);
      reward.resize(n);
      done.resize(n);
      timeout.resize(n);
      terminal_obs.resize(obs_dim, n);
    }
  };

  virtual void step(const Eigen::MatrixXd& actions, StepData& out) = 0;
};

// Vector of independent ThrowEnv instances stepped in parallel; per-instance
// RNG streams keep trajectories independent of scheduling.
class ThrowVecEnv : public BatchEnv {
 public:
  ThrowVecEnv(const MachineModel& model, const EnvConfig& cfg, int n_envs, std::uint64_t seed);

  int num_envs() const override { return static_cast<int>(envs_.size()); }
  int observation_size() const override { return envs_.front().observation_size(); }
  int action_size() const override { return envs_.front().action_size(); }
  double step_duration() const override { return control_dt_; }
  void reset_all(Eigen::MatrixXd& obs) override;
  void step(const Eigen::MatrixXd& actions, StepData& out) override;
  EpisodeStats drain_stats() override;

  ThrowEnv& env(int i) { return envs_[i]; }

 private:
  std::vector<ThrowEnv> envs_;
  double control_dt_ = 0.08;
  std::vector<double> return_acc_;
  std::vector<int> length_acc_;
  std::vector<EpisodeStats> pending_;  // per-env, merged deterministically
};

}  // namespace throwsim
