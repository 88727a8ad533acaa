#pragma once

#include <Eigen/Dense>
#include <string>

#include "throwsim/model.hpp"

namespace throwsim {

class SysidError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Timestamped passive-joint angle samples (CSV columns: t, angle).
struct OscillationLog {
  Eigen::VectorXd t;      // strictly increasing [s]
  Eigen::VectorXd angle;  // [rad]
  std::string axis = "pitch";
};

OscillationLog load_oscillation_log(const std::string& path);

// Release trials (CSV columns: t_cmd, t_onset).
struct ReleaseEventLog {
  Eigen::VectorXd t_cmd;
  Eigen::VectorXd t_onset;
};

ReleaseEventLog load_release_log(const std::string& path);

struct FrictionFitOptions {
  double upsilon_max = 0.2;
  double eta_max = 0.5;
  int grid = 21;          // grid points per axis and refinement level
  int levels = 4;
  double max_residual = 0.25;  // RMS angle error [rad] above which the fit failed
  double gravity = 9.81;
};

struct FrictionFit {
  FrictionParams params;
  double residual = 0.0;  // RMS angle error of the best candidate [rad]
  int evaluations = 0;
};

// Trajectory-shooting fit: simulates the damped pendulum from the log's
// initial condition for each candidate (upsilon, eta) and minimizes the RMS
// angle error over a refined grid.
FrictionFit fit_friction(const OscillationLog& log, double pendulum_length,
                         const FrictionFitOptions& options = {});

struct DelayEstimate {
  double mean = 0.0;
  double stddev = 0.0;  // (n-1)-denominator; 0 for a single trial
  int n = 0;
};

DelayEstimate estimate_release_delay(const ReleaseEventLog& log);

}  // namespace throwsim
