#include "throwsim/run_config.hpp"

#include <filesystem>

namespace throwsim {

namespace {

Eigen::Vector4d get_vec4(const KeyValueFile& kv, const std::string& key,
                         const Eigen::Vector4d& fallback) {
  if (!kv.has(key)) return fallback;
  const auto v = kv.get_doubles(key);
  if (v.size() == 1) return Eigen::Vector4d::Constant(v[0]);
  if (v.size() != 4) {
    throw ConfigError(kv.origin() + ": key '" + key + "': expected 1 or 4 values");
  }
  return Eigen::Vector4d(v[0], v[1], v[2], v[3]);
}

// PID defaults: settle a 0.3 rad/s velocity step in ~0.4 s with < 10%
// overshoot on the nominal machine (tuned in simulation; all overridable).
const Eigen::Vector4d kDefaultKp(2.0e5, 5.0e5, 1.2e5, 8.0e4);
const Eigen::Vector4d kDefaultKi(6.0e5, 1.5e6, 3.6e5, 2.4e5);
const Eigen::Vector4d kDefaultKd(0.0, 0.0, 0.0, 0.0);
const Eigen::Vector4d kDefaultIntegralClamp(0.5, 0.5, 0.5, 0.5);

}  // namespace

RunConfig load_run_config(const std::string& path) {
  return load_run_config(path, RunOverrides{});
}

RunConfig load_run_config(const std::string& path, const RunOverrides& overrides) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  RunConfig rc;

  rc.model_path = kv.get_string("model");
  {
    // Relative model paths resolve against the config file location.
    std::filesystem::path model_path(rc.model_path);
    if (model_path.is_relative()) {
      model_path = std::filesystem::path(path).parent_path() / model_path;
    }
    rc.model_path = model_path.string();
  }
  rc.model = load_machine_model(rc.model_path);

  rc.variant = kv.get_string("variant", "2d");
  if (rc.variant != "2d" && rc.variant != "3d") {
    throw ConfigError(kv.origin() + ": key 'variant': expected 2d|3d");
  }
  rc.seed = static_cast<std::uint64_t>(kv.get_int64("seed", 0));
  rc.workers = kv.get_int("workers", 0);
  rc.out_dir = kv.get_string("out", "out");

  EnvConfig& env = rc.env;
  env.planar = rc.variant == "2d";
  env.sim_dt = kv.get_double("env.sim_dt", 0.01);
  env.decimation = kv.get_int("env.decimation", 8);
  env.max_steps = kv.get_int("env.max_steps", 100);
  env.target_min_factor = kv.get_double("env.target_min_factor", 0.6);
  env.target_max_factor = kv.get_double("env.target_max_factor", 1.45);
  env.release_threshold = kv.get_double("env.release_threshold", 0.9);
  env.assist_enabled = kv.get_bool("env.assist", true);
  env.assist_probability = kv.get_double("env.assist_probability", 0.05);
  env.assist_distance = kv.get_double("env.assist_distance", 1.5);
  env.assist_speed = kv.get_double("env.assist_speed", 0.5);
  env.reset_max_attempts = kv.get_int("env.reset_max_attempts", 1000);

  env.reward.c1 = kv.get_double("reward.c1", 10.0);
  env.reward.c2 = kv.get_double("reward.c2", 1.0);
  env.reward.c3 = kv.get_double("reward.c3", 0.05);
  env.reward.c4 = kv.get_double("reward.c4", 0.01);
  env.reward.b1 = kv.get_double("reward.b1", 0.5);
  env.reward.b2 = kv.get_double("reward.b2", 0.5);
  env.reward.p_term = kv.get_double("reward.p_term", -10.0);
  env.reward.w_term = kv.get_double("reward.w_term", 20.0);

  env.noise.q = kv.get_double("noise.q", 0.0);
  env.noise.dq = kv.get_double("noise.dq", 0.0);
  env.noise.r_ee = kv.get_double("noise.r_ee", 0.0);
  env.noise.dr_ee = kv.get_double("noise.dr_ee", 0.0);
  env.noise.err = kv.get_double("noise.err", 0.0);

  env.cmd_randomization.scale_min = kv.get_double("rand.cmd_scale_min", 1.0);
  env.cmd_randomization.scale_max = kv.get_double("rand.cmd_scale_max", 1.0);
  env.cmd_randomization.additive_std = kv.get_double("rand.cmd_additive_std", 0.0);
  if (env.cmd_randomization.scale_min > 1.0 || env.cmd_randomization.scale_max < 1.0) {
    throw ConfigError(kv.origin() + ": command scale range must contain 1.0");
  }
  env.friction_scale_min = kv.get_double("rand.friction_scale_min", 1.0);
  env.friction_scale_max = kv.get_double("rand.friction_scale_max", 1.0);

  env.delay_mean = kv.get_double("delay.mean", 0.258);
  env.delay_std = kv.get_double("delay.std", 0.015);
  env.delay_randomize = kv.get_bool("delay.randomize", false);

  const std::string controller = kv.get_string("controller", "id");
  if (controller == "id") {
    env.controller = ControllerKind::Id;
  } else if (controller == "pid") {
    env.controller = ControllerKind::Pid;
  } else {
    throw ConfigError(kv.origin() + ": key 'controller': expected id|pid");
  }
  env.id_controller.gain = kv.get_double("idctl.gain", 16.0);
  env.pid_gains.kp = get_vec4(kv, "pid.kp", kDefaultKp);
  env.pid_gains.ki = get_vec4(kv, "pid.ki", kDefaultKi);
  env.pid_gains.kd = get_vec4(kv, "pid.kd", kDefaultKd);
  env.pid_gains.integral_clamp = get_vec4(kv, "pid.integral_clamp", kDefaultIntegralClamp);
  env.pid_gains.gravity_ff = kv.get_bool("pid.gravity_ff", true);
  env.torque_limit_scale = kv.get_double("torque_limit_scale", 3.0);

  TrainConfig& train = rc.train;
  train.n_envs = kv.get_int("train.envs", 1024);
  train.iterations = kv.get_int("train.iterations", 800);
  train.steps_per_iter = kv.get_int("train.steps_per_iter", 32);
  train.ppo.gamma = kv.get_double("train.gamma", 0.99);
  train.ppo.lambda = kv.get_double("train.lambda", 0.95);
  train.ppo.clip = kv.get_double("train.clip", 0.2);
  train.ppo.learning_rate = kv.get_double("train.lr", 3e-4);
  train.ppo.epochs = kv.get_int("train.epochs", 5);
  train.ppo.minibatches = kv.get_int("train.minibatches", 4);
  train.ppo.entropy_coef = kv.get_double("train.entropy_coef", 0.005);
  train.ppo.value_coef = kv.get_double("train.value_coef", 1.0);
  train.ppo.max_grad_norm = kv.get_double("train.max_grad_norm", 1.0);
  train.ppo.normalize_advantages = kv.get_bool("train.normalize_advantages", true);
  {
    const auto hidden = kv.get_doubles("train.hidden", {256, 128});
    train.hidden.clear();
    for (double h : hidden) train.hidden.push_back(static_cast<int>(h));
  }
  train.init_log_std = kv.get_double("train.init_log_std", 0.0);
  train.normalize_obs = kv.get_bool("train.normalize_obs", true);
  train.checkpoint_every = kv.get_int("train.checkpoint_every", 0);
  train.variant = rc.variant;

  SweepConfig& sweep = rc.sweep;
  sweep.distances = kv.get_doubles("sweep.distances", {7.5, 8.0, 8.5, 9.0, 9.5, 10.0});
  sweep.repeats = kv.get_int("sweep.repeats", 200);
  sweep.randomize_init = kv.get_bool("sweep.randomize_init", true);
  if (sweep.repeats < 1) throw ConfigError(kv.origin() + ": sweep.repeats must be >= 1");
  for (double d : sweep.distances) {
    if (d <= 0) throw ConfigError(kv.origin() + ": sweep.distances must be positive");
  }

  // Basic cross-field checks.
  if (!(train.ppo.gamma > 0.0 && train.ppo.gamma <= 1.0)) {
    throw ConfigError(kv.origin() + ": train.gamma must be in (0, 1]");
  }
  if (!(train.ppo.lambda > 0.0 && train.ppo.lambda <= 1.0)) {
    throw ConfigError(kv.origin() + ": train.lambda must be in (0, 1]");
  }
  if (!(train.ppo.clip > 0.0)) throw ConfigError(kv.origin() + ": train.clip must be > 0");
  if (env.target_min_factor >= env.target_max_factor) {
    throw ConfigError(kv.origin() + ": env.target_min_factor must be below the max factor");
  }

  kv.require_all_used();

  // Apply overrides (flag > environment > file), then freeze the snapshot.
  if (overrides.has_seed) rc.seed = overrides.seed;
  if (overrides.has_out) rc.out_dir = overrides.out_dir;
  if (overrides.has_workers) rc.workers = overrides.workers;

  KeyValueFile snapshot = kv;
  snapshot.set("seed", std::to_string(rc.seed));
  snapshot.set("out", rc.out_dir);
  snapshot.set("workers", std::to_string(rc.workers));
  snapshot.set("model", rc.model_path);
  snapshot.set("variant", rc.variant);
  rc.resolved_snapshot = snapshot.serialize();
  rc.config_hash = fnv1a_hash(rc.resolved_snapshot);
  rc.train.seed = rc.seed;
  rc.train.config_hash = rc.config_hash;
  rc.sweep.seed = rc.seed;
  return rc;
}

}  // namespace throwsim
