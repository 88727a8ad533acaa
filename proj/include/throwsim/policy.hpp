#pragma once

#include <cstdint>
#include <string>

#include "throwsim/mlp.hpp"

namespace throwsim {

// Running mean/variance observation normalizer (batch-merged Welford).
struct RunningNormalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double count = 0.0;
  bool enabled = true;
  double clip = 10.0;

  void init(int dim) {
    mean = Eigen::VectorXd::Zero(dim);
    var = Eigen::VectorXd::Ones(dim);
    count = 0.0;
  }
  void update(const Eigen::MatrixXd& batch);  // one sample per column
  Eigen::MatrixXd apply(const Eigen::MatrixXd& batch) const;
  Eigen::VectorXd apply_one(const Eigen::VectorXd& x) const;
};

// Diagonal-Gaussian actor + value critic, both [obs -> 256 -> 128 -> out].
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int obs_dim, int act_dim, const std::vector<int>& hidden, Rng& rng,
                 double init_log_std = 0.0);

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  Eigen::MatrixXd actor_mean(const Eigen::MatrixXd& obs, Mlp::Workspace* ws = nullptr) const {
    return actor.forward(obs, ws);
  }
  Eigen::VectorXd values(const Eigen::MatrixXd& obs, Mlp::Workspace* ws = nullptr) const {
    return critic.forward(obs, ws).row(0).transpose();
  }

  // Draws actions column-wise (mean + sigma * xi) and returns exact diagonal
  // Gaussian log-densities.
  void sample(const Eigen::MatrixXd& mean, Rng& rng, Eigen::MatrixXd* actions,
              Eigen::VectorXd* log_prob) const;
  Eigen::VectorXd log_prob(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& actions) const;
  double entropy() const;  // state-independent for a diagonal Gaussian

  Mlp actor;
  Mlp critic;
  Eigen::VectorXd log_std;

 private:
  int obs_dim_ = 0;
  int act_dim_ = 0;
};

// Versioned binary checkpoint: policy weights, log-std, normalizer state,
// variant tag and the hash of the resolved config that produced it.
struct Checkpoint {
  std::string variant;  // "2d" | "3d"
  std::uint64_t config_hash = 0;
  GaussianPolicy policy;
  RunningNormalizer normalizer;

  // Deterministic greedy action for evaluation (normalizes, runs the actor).
  Eigen::VectorXd act(const Eigen::VectorXd& obs) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace throwsim
