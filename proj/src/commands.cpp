#include "throwsim/commands.hpp"

#include <Eigen/Core>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "throwsim/sysid.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace throwsim {

namespace {

void write_snapshot(const RunConfig& rc) {
  std::filesystem::create_directories(rc.out_dir);
  std::ofstream out(rc.out_dir + "/config_resolved.cfg", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write config snapshot in " + rc.out_dir);
  out << rc.resolved_snapshot;
}

Checkpoint load_checkpoint_for(const RunConfig& rc, const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.variant != rc.variant) {
    throw ConfigError("checkpoint variant '" + ckpt.variant + "' does not match config variant '" +
                      rc.variant + "'");
  }
  const int expected_obs = rc.variant == "2d" ? 56 : 65;
  if (ckpt.policy.obs_dim() != expected_obs) {
    throw ConfigError("checkpoint observation size " + std::to_string(ckpt.policy.obs_dim()) +
                      " does not match the " + rc.variant + " variant (" +
                      std::to_string(expected_obs) + ")");
  }
  return ckpt;
}

class CsvTraceSink : public TraceSink {
 public:
  explicit CsvTraceSink(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot write trace file " + path);
    out_ << "time";
    for (int i = 1; i <= 6; ++i) out_ << ",q" << i;
    for (int i = 1; i <= 6; ++i) out_ << ",dq" << i;
    for (int i = 1; i <= 5; ++i) out_ << ",u" << i;
    out_ << ",ball_x,ball_y,ball_z,ball_vx,ball_vy,ball_vz,released,impacted,"
            "reward,r_delta_err,r_err3d,r_act_diff,r_act,r_term,event\n";
  }

  void append(const TraceRow& row) override {
    out_ << format_double(row.time);
    for (int i = 0; i < 6; ++i) out_ << ',' << format_double(row.q[i]);
    for (int i = 0; i < 6; ++i) out_ << ',' << format_double(row.dq[i]);
    for (int i = 0; i < 5; ++i) {
      out_ << ',' << (i < row.command.size() ? format_double(row.command[i]) : "");
    }
    const BallState& ball = row.ball;
    out_ << ',' << format_double(ball.position.x()) << ',' << format_double(ball.position.y())
         << ',' << format_double(ball.position.z()) << ',' << format_double(ball.velocity.x())
         << ',' << format_double(ball.velocity.y()) << ',' << format_double(ball.velocity.z())
         << ',' << (ball.released ? 1 : 0) << ',' << (ball.impacted ? 1 : 0);
    if (row.control_boundary) {
      out_ << ',' << format_double(row.reward.total) << ',' << format_double(row.reward.delta_err)
           << ',' << format_double(row.reward.err3d) << ',' << format_double(row.reward.act_diff)
           << ',' << format_double(row.reward.act) << ',' << format_double(row.reward.termination);
    } else {
      out_ << ",,,,,,";
    }
    out_ << ',' << (row.release_event ? "release" : (row.impact_event ? "impact" : "")) << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace

void configure_workers(int workers) {
#ifdef _OPENMP
  if (workers > 0) {
    omp_set_dynamic(0);
    omp_set_num_threads(workers);
  }
#endif
  if (workers > 0) Eigen::setNbThreads(workers);
}

void cmd_train(const RunConfig& rc) {
  write_snapshot(rc);
  TrainConfig cfg = rc.train;
  cfg.out_dir = rc.out_dir;
  ThrowVecEnv env(rc.model, rc.env, cfg.n_envs, derive_seed(rc.seed, 0x656e76));
  train(env, cfg);
}

void cmd_eval(const std::string& checkpoint_path, const RunConfig& rc) {
  const Checkpoint ckpt = load_checkpoint_for(rc, checkpoint_path);
  write_snapshot(rc);
  const PolicyFn policy = [&ckpt](const Eigen::VectorXd& obs) { return ckpt.act(obs); };
  const std::vector<ImpactRecord> records = run_target_sweep(policy, rc.model, rc.env, rc.sweep);
  const std::vector<DistanceStats> stats = impact_statistics(records);
  export_report(stats, records, rc.out_dir);
  for (const DistanceStats& s : stats) {
    std::printf("d=%5.2f m | landed %3d/%3d | impact %6.2f m | sigma down %.3f cross %.3f | "
                "err3d %.3f\n",
                s.distance, s.landed, s.episodes, s.mean_impact_downrange, s.std_downrange,
                s.std_crossrange, s.mean_err3d);
  }
  std::fflush(stdout);
}

IdentifyResult cmd_identify(const std::string& kind, const std::string& log_path,
                            double pendulum_length, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  IdentifyResult result;
  std::ofstream out;
  if (kind == "friction") {
    const OscillationLog log = load_oscillation_log(log_path);
    const FrictionFit fit = fit_friction(log, pendulum_length);
    result.a = fit.params.upsilon;
    result.b = fit.params.eta;
    result.residual = fit.residual;
    result.n = static_cast<int>(log.t.size());
    out.open(out_dir + "/friction_fit.cfg", std::ios::trunc);
    out << "friction.upsilon = " << format_double(result.a) << "\n"
        << "friction.eta = " << format_double(result.b) << "\n"
        << "fit.rms_residual = " << format_double(result.residual) << "\n"
        << "fit.samples = " << result.n << "\n";
    std::printf("friction fit: upsilon = %.6g  eta = %.6g  (rms residual %.3g rad, %d samples)\n",
                result.a, result.b, result.residual, result.n);
  } else if (kind == "delay") {
    const ReleaseEventLog log = load_release_log(log_path);
    const DelayEstimate est = estimate_release_delay(log);
    result.a = est.mean;
    result.b = est.stddev;
    result.n = est.n;
    out.open(out_dir + "/delay_fit.cfg", std::ios::trunc);
    out << "delay.mean = " << format_double(est.mean) << "\n"
        << "delay.std = " << format_double(est.stddev) << "\n"
        << "fit.trials = " << est.n << "\n";
    std::printf("release delay: mean = %.4f s  std = %.4f s  (%d trials)\n", est.mean, est.stddev,
                est.n);
  } else {
    throw ConfigError("identify: kind must be friction|delay, got '" + kind + "'");
  }
  if (!out) throw std::runtime_error("cannot write identification report in " + out_dir);
  std::fflush(stdout);
  return result;
}

void cmd_rollout(const std::string& checkpoint_path, const RunConfig& rc,
                 const std::string& trace_path) {
  const Checkpoint ckpt = load_checkpoint_for(rc, checkpoint_path);
  {
    RunConfig snapshot_rc = rc;
    snapshot_rc.out_dir = std::filesystem::path(trace_path).parent_path().string();
    if (snapshot_rc.out_dir.empty()) snapshot_rc.out_dir = ".";
    write_snapshot(snapshot_rc);
  }
  EnvConfig cfg = rc.env;
  cfg.assist_enabled = false;
  cfg.noise = ObservationNoise{};
  cfg.cmd_randomization = CommandRandomization{};
  cfg.friction_scale_min = 1.0;
  cfg.friction_scale_max = 1.0;

  ThrowEnv env(rc.model, cfg, derive_seed(rc.seed, 0x726f6c6c));
  CsvTraceSink sink(trace_path);
  env.set_trace(&sink);

  Eigen::VectorXd obs = env.observation();
  for (int step = 0; step < cfg.max_steps; ++step) {
    const ThrowEnv::StepResult res = env.step(ckpt.act(obs));
    obs = env.observation();
    if (res.done) {
      std::printf("rollout: %s after %.2f s", outcome_name(res.termination), env.time());
      if (res.termination == Termination::Landed) {
        std::printf(", impact error %.3f m",
                    (env.ball().impact_point - env.target().position).norm());
      }
      std::printf("\n");
      break;
    }
  }
  std::fflush(stdout);
}

}  // namespace throwsim
