#pragma once

#include <functional>
#include <string>

#include "throwsim/policy.hpp"
#include "throwsim/throw_env.hpp"

namespace throwsim {

// Thrown when an update produces non-finite losses; the CLI maps it to the
// runtime-abort exit code.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t
// A_t     = delta_t + gamma lambda (1 - done_t) A_{t+1}
// Matrices are steps x envs; `bootstrap` holds V(s_T) per env.
void compute_gae(const Eigen::MatrixXd& rewards, const Eigen::MatrixXd& values,
                 const Eigen::MatrixXi& dones, const Eigen::VectorXd& bootstrap, double gamma,
                 double lambda, Eigen::MatrixXd* advantages, Eigen::MatrixXd* returns);

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double learning_rate = 3e-4;
  int epochs = 5;
  int minibatches = 4;
  double entropy_coef = 0.005;
  double value_coef = 1.0;
  double max_grad_norm = 1.0;  // <= 0 disables clipping
  bool normalize_advantages = true;
};

// Flattened on-policy batch (one sample per column).
struct RolloutBatch {
  Eigen::MatrixXd obs;        // obs_dim x B (already normalized)
  Eigen::MatrixXd actions;    // act_dim x B
  Eigen::VectorXd log_probs;  // B
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// PPO optimizer state: one Adam slot per parameter tensor of the policy.
class PpoOptimizer {
 public:
  explicit PpoOptimizer(const GaussianPolicy& policy);
  UpdateStats update(GaussianPolicy& policy, const RolloutBatch& batch, const PpoConfig& cfg,
                     Rng& rng);

  // Single-batch surrogate gradient with respect to the actor parameters
  // (used by tests to compare against a plain policy-gradient oracle).
  static Mlp::Grads actor_surrogate_grads(const GaussianPolicy& policy,
                                          const RolloutBatch& batch, double clip,
                                          Eigen::VectorXd* d_log_std = nullptr);

 private:
  AdamState adam_;
  std::vector<int> slots_;
};

struct TrainConfig {
  int n_envs = 1024;
  int iterations = 800;
  int steps_per_iter = 32;
  PpoConfig ppo;
  std::vector<int> hidden = {256, 128};
  double init_log_std = 0.0;
  bool normalize_obs = true;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0: only final
  std::string out_dir;       // empty: no files written
  std::string variant = "3d";
  std::uint64_t config_hash = 0;
  bool verbose = true;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::string log_csv;  // full training log (also written to out_dir)
  std::int64_t env_steps = 0;
};

// Rollout/update loop over a batched environment. Deterministic for a fixed
// seed and worker count.
TrainResult train(BatchEnv& env, const TrainConfig& cfg,
                  const std::function<void(int, const UpdateStats&)>& on_iteration = {});

}  // namespace throwsim
