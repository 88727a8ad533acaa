#pragma once

#include <string>

#include "throwsim/run_config.hpp"

namespace throwsim {

// Workflow entry points shared by the CLI and tests. Each writes its outputs
// plus the resolved config snapshot into the run's output directory and is
// byte-deterministic for a fixed (config, seed, workers).

// Trains per `train.*`; writes checkpoint.bin, train_log.csv, config_resolved.cfg.
void cmd_train(const RunConfig& rc);

// Sweeps targets with a trained policy; writes records.csv, summary.csv,
// scatter.csv, config_resolved.cfg. Throws ConfigError on a variant mismatch.
void cmd_eval(const std::string& checkpoint_path, const RunConfig& rc);

// Fits friction or delay parameters from a log; writes <kind>_fit.cfg and
// prints the parameters. `pendulum_length` only applies to friction fits.
struct IdentifyResult {
  double a = 0.0, b = 0.0, residual = 0.0;
  int n = 0;
};
IdentifyResult cmd_identify(const std::string& kind, const std::string& log_path,
                            double pendulum_length, const std::string& out_dir);

// Deterministic single-episode rollout; writes the 100 Hz trace CSV.
void cmd_rollout(const std::string& checkpoint_path, const RunConfig& rc,
                 const std::string& trace_path);

// Configures OpenMP/Eigen thread counts; 0 keeps the hardware default.
void configure_workers(int workers);

}  // namespace throwsim
