#pragma once

#include <functional>
#include <string>
#include <vector>

#include "throwsim/throw_env.hpp"

namespace throwsim {

// Deterministic observation -> action map evaluated by the harness.
using PolicyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct ImpactRecord {
  double distance = 0.0;  // commanded target distance [m]
  int repeat = 0;
  std::uint64_t seed = 0;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  Eigen::Vector3d impact = Eigen::Vector3d::Zero();  // valid for landed outcomes
  double err_downrange = 0.0;
  double err_crossrange = 0.0;
  double err_3d = 0.0;
  int release_step = -1;  // control step of the release command, -1 if none
  Termination outcome = Termination::Timeout;
};

const char* outcome_name(Termination t);
Termination outcome_from_name(const std::string& name);

struct SweepConfig {
  std::vector<double> distances = {7.5, 8.0, 8.5, 9.0, 9.5, 10.0};
  int repeats = 200;
  std::uint64_t seed = 0;
  bool randomize_init = true;
};

// Runs repeats x distances episodes under the configured low-level controller;
// records are ordered by (distance index, repeat) regardless of scheduling.
std::vector<ImpactRecord> run_target_sweep(const PolicyFn& policy, const MachineModel& model,
                                           const EnvConfig& base_cfg, const SweepConfig& sweep);

struct DistanceStats {
  double distance = 0.0;
  int episodes = 0;
  int landed = 0;
  double landing_rate = 0.0;
  // Over landed episodes only:
  double mean_impact_downrange = 0.0;
  double mean_impact_crossrange = 0.0;
  double std_downrange = 0.0;   // (n-1) denominator
  double std_crossrange = 0.0;
  double mean_err3d = 0.0;
  double mean_impact_distance = 0.0;  // horizontal distance from the cabin axis
};

std::vector<DistanceStats> impact_statistics(const std::vector<ImpactRecord>& records);

// Writes records.csv (one row per episode), summary.csv (one row per
// distance) and scatter.csv (plot-ready target-vs-impact long format).
void export_report(const std::vector<DistanceStats>& stats,
                   const std::vector<ImpactRecord>& records, const std::string& dir);

std::vector<ImpactRecord> parse_records_csv(const std::string& path);

}  // namespace throwsim
