#include "throwsim/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "throwsim/config.hpp"
#include "throwsim/dynamics.hpp"

namespace throwsim {

namespace {

std::vector<std::vector<double>> load_csv_columns(const std::string& path,
                                                  const std::string& expected_header) {
  std::ifstream in(path);
  if (!in) throw SysidError("cannot open log file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SysidError(path + ": empty file");
  // Normalize the header (strip spaces / CR).
  std::string header;
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) header += c;
  }
  if (header != expected_header) {
    throw SysidError(path + ": expected header '" + expected_header + "', got '" + header + "'");
  }
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    bool blank = true;
    for (char c : line) blank &= std::isspace(static_cast<unsigned char>(c)) != 0;
    if (blank) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) {
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      while (end && std::isspace(static_cast<unsigned char>(*end))) ++end;
      if (token.empty() || !end || *end != '\0') {
        throw SysidError(path + ":" + std::to_string(lineno) + ": bad number '" + token + "'");
      }
      row.push_back(v);
    }
    if (row.size() != 2) {
      throw SysidError(path + ":" + std::to_string(lineno) + ": expected 2 columns, got " +
                       std::to_string(row.size()));
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw SysidError(path + ": no data rows");
  return rows;
}

int count_sign_changes(const Eigen::VectorXd& x) {
  // Sign changes about the final rest value estimate.
  const double rest = x.tail(std::max<Eigen::Index>(1, x.size() / 10)).mean();
  int changes = 0;
  double prev = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x[i] - rest;
    if (d == 0.0) continue;
    if (prev != 0.0 && (d > 0) != (prev > 0)) ++changes;
    prev = d;
  }
  return changes;
}

// RK4 on the damped pendulum theta'' = -(g/L) sin(theta) + friction(theta').
struct PendulumSim {
  double g_over_l;
  FrictionParams params;

  void rhs(double theta, double omega, double* dth, double* dom) const {
    *dth = omega;
    *dom = -g_over_l * std::sin(theta) + friction_accel(params, omega);
  }

  void step(double dt, double* theta, double* omega) const {
    double k1t, k1o, k2t, k2o, k3t, k3o, k4t, k4o;
    rhs(*theta, *omega, &k1t, &k1o);
    rhs(*theta + 0.5 * dt * k1t, *omega + 0.5 * dt * k1o, &k2t, &k2o);
    rhs(*theta + 0.5 * dt * k2t, *omega + 0.5 * dt * k2o, &k3t, &k3o);
    rhs(*theta + dt * k3t, *omega + dt * k3o, &k4t, &k4o);
    *theta += dt / 6.0 * (k1t + 2 * k2t + 2 * k3t + k4t);
    *omega += dt / 6.0 * (k1o + 2 * k2o + 2 * k3o + k4o);
  }
};

double shooting_rms(const OscillationLog& log, double pendulum_length, double gravity,
                    const FrictionParams& params, double theta0, double omega0) {
  PendulumSim sim{gravity / pendulum_length, params};
  double theta = theta0, omega = omega0;
  double sq_sum = 0.0;
  constexpr int kSubsteps = 8;
  for (Eigen::Index i = 0; i < log.t.size(); ++i) {
    if (i > 0) {
      const double dt = (log.t[i] - log.t[i - 1]) / kSubsteps;
      for (int s = 0; s < kSubsteps; ++s) sim.step(dt, &theta, &omega);
    }
    const double err = theta - log.angle[i];
    sq_sum += err * err;
  }
  return std::sqrt(sq_sum / static_cast<double>(log.t.size()));
}

}  // namespace

OscillationLog load_oscillation_log(const std::string& path) {
  const auto rows = load_csv_columns(path, "t,angle");
  OscillationLog log;
  log.t.resize(static_cast<Eigen::Index>(rows.size()));
  log.angle.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    log.t[static_cast<Eigen::Index>(i)] = rows[i][0];
    log.angle[static_cast<Eigen::Index>(i)] = rows[i][1];
    if (i > 0 && rows[i][0] <= rows[i - 1][0]) {
      throw SysidError(path + ": timestamps must be strictly increasing");
    }
  }
  return log;
}

ReleaseEventLog load_release_log(const std::string& path) {
  const auto rows = load_csv_columns(path, "t_cmd,t_onset");
  ReleaseEventLog log;
  log.t_cmd.resize(static_cast<Eigen::Index>(rows.size()));
  log.t_onset.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][1] < rows[i][0]) {
      throw SysidError(path + ": free-fall onset precedes the command in row " +
                       std::to_string(i + 1));
    }
    log.t_cmd[static_cast<Eigen::Index>(i)] = rows[i][0];
    log.t_onset[static_cast<Eigen::Index>(i)] = rows[i][1];
  }
  return log;
}

FrictionFit fit_friction(const OscillationLog& log, double pendulum_length,
                         const FrictionFitOptions& options) {
  if (pendulum_length <= 0.0) throw SysidError("fit_friction: pendulum length must be > 0");
  if (log.t.size() < 16) throw SysidError("fit_friction: insufficient data (need >= 16 samples)");
  if (count_sign_changes(log.angle) < 4) {
    throw SysidError("fit_friction: log must cover at least two full oscillation periods");
  }

  const double theta0 = log.angle[0];
  // Second-order one-sided estimate of the initial rate.
  const double h = log.t[1] - log.t[0];
  const double omega0 =
      (-3.0 * log.angle[0] + 4.0 * log.angle[1] - log.angle[2]) / (2.0 * h);

  FrictionFit fit;
  fit.residual = std::numeric_limits<double>::infinity();

  double ups_lo = 0.0, ups_hi = options.upsilon_max;
  double eta_lo = 0.0, eta_hi = options.eta_max;
  const int n = std::max(3, options.grid);

  for (int level = 0; level < options.levels; ++level) {
    double best_ups = fit.params.upsilon, best_eta = fit.params.eta;
    for (int i = 0; i < n; ++i) {
      const double ups = ups_lo + (ups_hi - ups_lo) * i / (n - 1);
      for (int j = 0; j < n; ++j) {
        const double eta = eta_lo + (eta_hi - eta_lo) * j / (n - 1);
        const double rms = shooting_rms(log, pendulum_length, options.gravity,
                                        FrictionParams{ups, eta}, theta0, omega0);
        ++fit.evaluations;
        if (rms < fit.residual) {
          fit.residual = rms;
          best_ups = ups;
          best_eta = eta;
        }
      }
    }
    fit.params.upsilon = best_ups;
    fit.params.eta = best_eta;
    // Shrink the box around the incumbent (span = two previous grid cells).
    const double ups_span = (ups_hi - ups_lo) / (n - 1);
    const double eta_span = (eta_hi - eta_lo) / (n - 1);
    ups_lo = std::max(0.0, best_ups - ups_span);
    ups_hi = std::min(options.upsilon_max, best_ups + ups_span);
    eta_lo = std::max(0.0, best_eta - eta_span);
    eta_hi = std::min(options.eta_max, best_eta + eta_span);
  }

  if (fit.residual > options.max_residual) {
    throw SysidError("fit_friction: no candidate reproduced the log (residual " +
                     format_double(fit.residual) + " rad)");
  }
  return fit;
}

DelayEstimate estimate_release_delay(const ReleaseEventLog& log) {
  const Eigen::Index n = log.t_cmd.size();
  if (n == 0) throw SysidError("estimate_release_delay: empty log");
  const Eigen::VectorXd delays = log.t_onset - log.t_cmd;
  DelayEstimate est;
  est.n = static_cast<int>(n);
  est.mean = delays.mean();
  est.stddev = n > 1 ? std::sqrt((delays.array() - est.mean).square().sum() /
                                 static_cast<double>(n - 1))
                     : 0.0;
  return est;
}

}  // namespace throwsim
