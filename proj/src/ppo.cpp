#include "throwsim/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "throwsim/config.hpp"

namespace throwsim {

void compute_gae(const Eigen::MatrixXd& rewards, const Eigen::MatrixXd& values,
                 const Eigen::MatrixXi& dones, const Eigen::VectorXd& bootstrap, double gamma,
                 double lambda, Eigen::MatrixXd* advantages, Eigen::MatrixXd* returns) {
  const Eigen::Index T = rewards.rows();
  const Eigen::Index N = rewards.cols();
  advantages->resize(T, N);
  returns->resize(T, N);
  Eigen::VectorXd gae = Eigen::VectorXd::Zero(N);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Eigen::ArrayXd not_done = (1 - dones.row(t).transpose().array()).cast<double>();
    const Eigen::ArrayXd next_value =
        (t == T - 1) ? bootstrap.array() : values.row(t + 1).transpose().array();
    const Eigen::ArrayXd delta = rewards.row(t).transpose().array() +
                                 gamma * next_value * not_done -
                                 values.row(t).transpose().array();
    gae = (delta + gamma * lambda * not_done * gae.array()).matrix();
    advantages->row(t) = gae.transpose();
  }
  *returns = *advantages + values;
}

PpoOptimizer::PpoOptimizer(const GaussianPolicy& policy) {
  auto register_mlp = [this](const Mlp& net) {
    for (int l = 0; l < net.num_layers(); ++l) {
      slots_.push_back(adam_.register_param(net.weights[l].rows(), net.weights[l].cols()));
      slots_.push_back(adam_.register_param(net.biases[l].size(), 1));
    }
  };
  register_mlp(policy.actor);
  register_mlp(policy.critic);
  slots_.push_back(adam_.register_param(policy.log_std.size(), 1));
}

namespace {

struct ActorBackprop {
  Eigen::VectorXd log_prob;     // per sample
  Eigen::VectorXd ratio;        // exp(logp_new - logp_old)
  Mlp::Workspace ws;
  Eigen::MatrixXd mean;
};

// dL/d(mean) and dL/d(log_std) for dL/d(log pi) = coeff (per sample).
void gaussian_head_backward(const GaussianPolicy& policy, const Eigen::MatrixXd& mean,
                            const Eigen::MatrixXd& actions, const Eigen::VectorXd& coeff,
                            Eigen::MatrixXd* d_mean, Eigen::VectorXd* d_log_std) {
  const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std.array()).exp();
  const Eigen::ArrayXXd diff = (actions - mean).array();
  // dlogp/dmean = (a - mu) / sigma^2, column i weighted by coeff_i
  *d_mean = (diff.colwise() * inv_var).matrix() * coeff.asDiagonal();
  // dlogp/dlogstd_j = (a_j - mu_j)^2 / sigma_j^2 - 1, summed with weights
  const Eigen::ArrayXXd z2 = diff.square().colwise() * inv_var;
  *d_log_std = (z2 - 1.0).matrix() * coeff;
}

double global_grad_norm(const std::vector<const Eigen::MatrixXd*>& mats,
                        const std::vector<const Eigen::VectorXd*>& vecs) {
  double sq = 0.0;
  for (const auto* m : mats) sq += m->squaredNorm();
  for (const auto* v : vecs) sq += v->squaredNorm();
  return std::sqrt(sq);
}

void scale_grads(double s, std::vector<Eigen::MatrixXd*> mats, std::vector<Eigen::VectorXd*> vecs) {
  for (auto* m : mats) *m *= s;
  for (auto* v : vecs) *v *= s;
}

}  // namespace

Mlp::Grads PpoOptimizer::actor_surrogate_grads(const GaussianPolicy& policy,
                                               const RolloutBatch& batch, double clip,
                                               Eigen::VectorXd* d_log_std_out) {
  const Eigen::Index B = batch.obs.cols();
  Mlp::Workspace ws;
  const Eigen::MatrixXd mean = policy.actor_mean(batch.obs, &ws);
  const Eigen::VectorXd logp_new = policy.log_prob(mean, batch.actions);
  const Eigen::ArrayXd ratio = (logp_new - batch.log_probs).array().exp();
  const Eigen::ArrayXd adv = batch.advantages.array();

  const Eigen::ArrayXd surr1 = ratio * adv;
  const Eigen::ArrayXd surr2 = ratio.min(1.0 + clip).max(1.0 - clip) * adv;
  // Gradient flows through the ratio only where the unclipped branch is the
  // active minimum.
  Eigen::VectorXd coeff(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    coeff[i] = (surr1[i] <= surr2[i]) ? -adv[i] * ratio[i] / static_cast<double>(B) : 0.0;
  }

  Eigen::MatrixXd d_mean;
  Eigen::VectorXd d_log_std;
  gaussian_head_backward(policy, mean, batch.actions, coeff, &d_mean, &d_log_std);
  Mlp::Grads grads = policy.actor.make_grads();
  policy.actor.backward(ws, d_mean, grads);
  if (d_log_std_out) *d_log_std_out = d_log_std;
  return grads;
}

UpdateStats PpoOptimizer::update(GaussianPolicy& policy, const RolloutBatch& batch,
                                 const PpoConfig& cfg, Rng& rng) {
  const Eigen::Index B = batch.obs.cols();
  Eigen::VectorXd advantages = batch.advantages;
  if (cfg.normalize_advantages && B > 1) {
    const double mean = advantages.mean();
    const double var = (advantages.array() - mean).square().sum() / static_cast<double>(B);
    advantages = ((advantages.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();
  }

  std::vector<int> order(B);
  std::iota(order.begin(), order.end(), 0);
  const int n_minibatches = std::max(1, cfg.minibatches);
  const Eigen::Index mb_size = B / n_minibatches;

  UpdateStats stats;
  int stat_count = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the run RNG keeps shuffling reproducible.
    for (Eigen::Index i = B - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(static_cast<int>(i) + 1)]);
    }
    for (int mb = 0; mb < n_minibatches; ++mb) {
      const Eigen::Index begin = mb * mb_size;
      const Eigen::Index count = (mb == n_minibatches - 1) ? (B - begin) : mb_size;
      if (count <= 0) continue;

      Eigen::MatrixXd obs(batch.obs.rows(), count);
      Eigen::MatrixXd act(batch.actions.rows(), count);
      Eigen::VectorXd logp_old(count), adv(count), ret(count);
      for (Eigen::Index c = 0; c < count; ++c) {
        const int idx = order[begin + c];
        obs.col(c) = batch.obs.col(idx);
        act.col(c) = batch.actions.col(idx);
        logp_old[c] = batch.log_probs[idx];
        adv[c] = advantages[idx];
        ret[c] = batch.returns[idx];
      }

      // Actor forward + surrogate.
      Mlp::Workspace ws_a;
      const Eigen::MatrixXd mean = policy.actor_mean(obs, &ws_a);
      const Eigen::VectorXd logp_new = policy.log_prob(mean, act);
      const Eigen::ArrayXd log_ratio = (logp_new - logp_old).array();
      const Eigen::ArrayXd ratio = log_ratio.exp();
      const Eigen::ArrayXd surr1 = ratio * adv.array();
      const Eigen::ArrayXd surr2 = ratio.min(1.0 + cfg.clip).max(1.0 - cfg.clip) * adv.array();
      const double policy_loss = -surr1.min(surr2).mean();
      const double entropy = policy.entropy();

      // Critic forward + value loss.
      Mlp::Workspace ws_c;
      const Eigen::VectorXd values = policy.values(obs, &ws_c);
      const Eigen::VectorXd v_err = values - ret;
      const double value_loss = 0.5 * v_err.squaredNorm() / static_cast<double>(count);

      const double loss = policy_loss - cfg.entropy_coef * entropy + cfg.value_coef * value_loss;
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("ppo_update: non-finite loss");
      }

      // Gradients.
      Eigen::VectorXd coeff(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        coeff[i] = (surr1[i] <= surr2[i])
                       ? -adv[i] * ratio[i] / static_cast<double>(count)
                       : 0.0;
      }
      Eigen::MatrixXd d_mean;
      Eigen::VectorXd d_log_std;
      gaussian_head_backward(policy, mean, act, coeff, &d_mean, &d_log_std);
      d_log_std.array() -= cfg.entropy_coef;  // entropy bonus: dH/dlogstd = 1

      Mlp::Grads actor_grads = policy.actor.make_grads();
      policy.actor.backward(ws_a, d_mean, actor_grads);

      Eigen::MatrixXd d_value =
          (cfg.value_coef / static_cast<double>(count)) * v_err.transpose();
      Mlp::Grads critic_grads = policy.critic.make_grads();
      policy.critic.backward(ws_c, d_value, critic_grads);

      // Global gradient-norm clipping.
      if (cfg.max_grad_norm > 0.0) {
        std::vector<const Eigen::MatrixXd*> mats;
        std::vector<const Eigen::VectorXd*> vecs;
        for (const auto& g : actor_grads.dW) mats.push_back(&g);
        for (const auto& g : critic_grads.dW) mats.push_back(&g);
        for (const auto& g : actor_grads.db) vecs.push_back(&g);
        for (const auto& g : critic_grads.db) vecs.push_back(&g);
        vecs.push_back(&d_log_std);
        const double norm = global_grad_norm(mats, vecs);
        if (norm > cfg.max_grad_norm) {
          const double s = cfg.max_grad_norm / norm;
          std::vector<Eigen::MatrixXd*> m2;
          std::vector<Eigen::VectorXd*> v2;
          for (auto& g : actor_grads.dW) m2.push_back(&g);
          for (auto& g : critic_grads.dW) m2.push_back(&g);
          for (auto& g : actor_grads.db) v2.push_back(&g);
          for (auto& g : critic_grads.db) v2.push_back(&g);
          v2.push_back(&d_log_std);
          scale_grads(s, m2, v2);
        }
      }

      // Adam over all tensors, registration order.
      adam_.begin_step();
      int slot = 0;
      for (int l = 0; l < policy.actor.num_layers(); ++l) {
        adam_.update(slots_[slot++], policy.actor.weights[l], actor_grads.dW[l],
                     cfg.learning_rate);
        adam_.update(slots_[slot++], policy.actor.biases[l], actor_grads.db[l],
                     cfg.learning_rate);
      }
      for (int l = 0; l < policy.critic.num_layers(); ++l) {
        adam_.update(slots_[slot++], policy.critic.weights[l], critic_grads.dW[l],
                     cfg.learning_rate);
        adam_.update(slots_[slot++], policy.critic.biases[l], critic_grads.db[l],
                     cfg.learning_rate);
      }
      adam_.update(slots_[slot++], policy.log_std, d_log_std, cfg.learning_rate);

      // Diagnostics.
      stats.policy_loss += policy_loss;
      stats.value_loss += value_loss;
      stats.entropy += entropy;
      stats.approx_kl += ((ratio - 1.0) - log_ratio).mean();
      stats.clip_fraction += ((ratio - 1.0).abs() > cfg.clip).cast<double>().mean();
      ++stat_count;
    }
  }

  if (stat_count > 0) {
    stats.policy_loss /= stat_count;
    stats.value_loss /= stat_count;
    stats.entropy /= stat_count;
    stats.approx_kl /= stat_count;
    stats.clip_fraction /= stat_count;
  }
  return stats;
}

TrainResult train(BatchEnv& env, const TrainConfig& cfg,
                  const std::function<void(int, const UpdateStats&)>& on_iteration) {
  const int N = env.num_envs();
  const int T = cfg.steps_per_iter;
  const int obs_dim = env.observation_size();
  const int act_dim = env.action_size();

  Rng rng(derive_seed(cfg.seed, 0x7261696e));  // learner stream

  GaussianPolicy policy(obs_dim, act_dim, cfg.hidden, rng, cfg.init_log_std);
  RunningNormalizer normalizer;
  normalizer.enabled = cfg.normalize_obs;
  normalizer.init(obs_dim);
  PpoOptimizer optimizer(policy);

  Eigen::MatrixXd obs(obs_dim, N);
  env.reset_all(obs);

  std::vector<Eigen::MatrixXd> obs_buf(T), act_buf(T);
  Eigen::MatrixXd rewards(T, N), values(T, N);
  Eigen::MatrixXi dones(T, N);
  std::vector<Eigen::VectorXd> logp_buf(T);
  BatchEnv::StepData sd;

  std::string log_csv =
      "iter,env_steps,experience_years,episodes,mean_return,mean_ep_len,landing_rate,"
      "mean_landing_err,policy_loss,value_loss,entropy,approx_kl,clip_fraction\n";

  const bool write_files = !cfg.out_dir.empty();
  if (write_files) std::filesystem::create_directories(cfg.out_dir);

  auto make_checkpoint = [&]() {
    Checkpoint ckpt;
    ckpt.variant = cfg.variant;
    ckpt.config_hash = cfg.config_hash;
    ckpt.policy = policy;
    ckpt.normalizer = normalizer;
    return ckpt;
  };

  std::int64_t env_steps = 0;
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    for (int t = 0; t < T; ++t) {
      normalizer.update(obs);
      const Eigen::MatrixXd obs_n = normalizer.apply(obs);
      const Eigen::MatrixXd mean = policy.actor_mean(obs_n);
      Eigen::MatrixXd actions;
      Eigen::VectorXd logp;
      policy.sample(mean, rng, &actions, &logp);
      values.row(t) = policy.values(obs_n).transpose();

      env.step(actions, sd);

      // Time-limit terminations bootstrap through the terminal observation.
      Eigen::VectorXd reward_t = sd.reward;
      if ((sd.timeout.array() != 0).any()) {
        const Eigen::VectorXd v_term =
            policy.values(normalizer.apply(sd.terminal_obs));
        for (int i = 0; i < N; ++i) {
          if (sd.timeout[i]) reward_t[i] += cfg.ppo.gamma * v_term[i];
        }
      }

      obs_buf[t] = obs_n;
      act_buf[t] = actions;
      logp_buf[t] = logp;
      rewards.row(t) = reward_t.transpose();
      dones.row(t) = sd.done.transpose();
      obs = sd.obs;
    }
    env_steps += static_cast<std::int64_t>(T) * N;

    const Eigen::VectorXd bootstrap = policy.values(normalizer.apply(obs));
    Eigen::MatrixXd advantages, returns;
    compute_gae(rewards, values, dones, bootstrap, cfg.ppo.gamma, cfg.ppo.lambda, &advantages,
                &returns);

    RolloutBatch batch;
    batch.obs.resize(obs_dim, static_cast<Eigen::Index>(T) * N);
    batch.actions.resize(act_dim, static_cast<Eigen::Index>(T) * N);
    batch.log_probs.resize(static_cast<Eigen::Index>(T) * N);
    batch.advantages.resize(static_cast<Eigen::Index>(T) * N);
    batch.returns.resize(static_cast<Eigen::Index>(T) * N);
    for (int t = 0; t < T; ++t) {
      batch.obs.middleCols(static_cast<Eigen::Index>(t) * N, N) = obs_buf[t];
      batch.actions.middleCols(static_cast<Eigen::Index>(t) * N, N) = act_buf[t];
      batch.log_probs.segment(static_cast<Eigen::Index>(t) * N, N) = logp_buf[t];
      batch.advantages.segment(static_cast<Eigen::Index>(t) * N, N) =
          advantages.row(t).transpose();
      batch.returns.segment(static_cast<Eigen::Index>(t) * N, N) = returns.row(t).transpose();
    }

    const UpdateStats stats = optimizer.update(policy, batch, cfg.ppo, rng);
    const BatchEnv::EpisodeStats ep = env.drain_stats();

    const double years = static_cast<double>(env_steps) * env.step_duration() / (365.25 * 86400.0);
    const double mean_return = ep.episodes > 0 ? ep.return_sum / ep.episodes : 0.0;
    const double mean_len = ep.episodes > 0 ? ep.length_sum / ep.episodes : 0.0;
    const double landing_rate = ep.episodes > 0 ? static_cast<double>(ep.landed) / ep.episodes : 0.0;
    const double mean_err = ep.landed > 0 ? ep.landing_err_sum / ep.landed : 0.0;

    log_csv += std::to_string(iter) + "," + std::to_string(env_steps) + "," +
               format_double(years) + "," + std::to_string(ep.episodes) + "," +
               format_double(mean_return) + "," + format_double(mean_len) + "," +
               format_double(landing_rate) + "," + format_double(mean_err) + "," +
               format_double(stats.policy_loss) + "," + format_double(stats.value_loss) + "," +
               format_double(stats.entropy) + "," + format_double(stats.approx_kl) + "," +
               format_double(stats.clip_fraction) + "\n";

    if (cfg.verbose && (iter % 10 == 0 || iter == 1)) {
      std::printf(
          "iter %4d | steps %9lld | ep %6lld | ret %8.3f | len %5.1f | land %5.1f%% | err %6.3f\n",
          iter, static_cast<long long>(env_steps), static_cast<long long>(ep.episodes),
          mean_return, mean_len, 100.0 * landing_rate, mean_err);
      std::fflush(stdout);
    }

    if (on_iteration) on_iteration(iter, stats);

    if (write_files && cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0 &&
        iter < cfg.iterations) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%06d.bin", iter);
      save_checkpoint(make_checkpoint(), cfg.out_dir + "/" + name);
    }
  }

  TrainResult result;
  result.checkpoint = make_checkpoint();
  result.log_csv = log_csv;
  result.env_steps = env_steps;
  if (write_files) {
    save_checkpoint(result.checkpoint, cfg.out_dir + "/checkpoint.bin");
    std::ofstream log(cfg.out_dir + "/train_log.csv", std::ios::trunc);
    log << log_csv;
  }
  return result;
}

}  // namespace throwsim
