#pragma once

#include <string>

#include "throwsim/config.hpp"
#include "throwsim/eval.hpp"
#include "throwsim/ppo.hpp"
#include "throwsim/throw_env.hpp"

namespace throwsim {

// Everything a run needs, resolved from one key-value file with strict schema
// validation (unknown keys rejected, every default overridable).
struct RunConfig {
  std::string model_path;  // resolved relative to the config file
  MachineModel model;
  std::string variant = "2d";  // "2d" | "3d"
  std::uint64_t seed = 0;
  int workers = 0;  // 0: hardware default
  std::string out_dir = "out";

  EnvConfig env;
  TrainConfig train;
  SweepConfig sweep;

  std::uint64_t config_hash = 0;   // hash of the resolved snapshot
  std::string resolved_snapshot;   // deterministic serialization
};

RunConfig load_run_config(const std::string& path);

// Applies CLI/environment overrides (seed, output dir) before hashing.
struct RunOverrides {
  bool has_seed = false;
  std::uint64_t seed = 0;
  bool has_out = false;
  std::string out_dir;
  bool has_workers = false;
  int workers = 0;
};

RunConfig load_run_config(const std::string& path, const RunOverrides& overrides);

}  // namespace throwsim
