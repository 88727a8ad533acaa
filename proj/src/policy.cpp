#include "throwsim/policy.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace throwsim {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
}

void RunningNormalizer::update(const Eigen::MatrixXd& batch) {
  if (!enabled || batch.cols() == 0) return;
  const double n_b = static_cast<double>(batch.cols());
  const Eigen::VectorXd mean_b = batch.rowwise().mean();
  const Eigen::VectorXd var_b =
      (batch.colwise() - mean_b).array().square().matrix().rowwise().sum() / n_b;

  if (count == 0.0) {
    mean = mean_b;
    var = var_b;
    count = n_b;
    return;
  }
  const double total = count + n_b;
  const Eigen::VectorXd delta = mean_b - mean;
  const Eigen::VectorXd m2 =
      var * count + var_b * n_b +
      delta.array().square().matrix() * (count * n_b / total);
  mean += delta * (n_b / total);
  var = m2 / total;
  count = total;
}

Eigen::MatrixXd RunningNormalizer::apply(const Eigen::MatrixXd& batch) const {
  if (!enabled || count == 0.0) return batch;
  const Eigen::ArrayXd scale = (var.array() + 1e-8).sqrt().inverse();
  Eigen::MatrixXd out = (batch.colwise() - mean);
  out.array().colwise() *= scale;
  return out.array().min(clip).max(-clip);
}

Eigen::VectorXd RunningNormalizer::apply_one(const Eigen::VectorXd& x) const {
  if (!enabled || count == 0.0) return x;
  const Eigen::ArrayXd scale = (var.array() + 1e-8).sqrt().inverse();
  Eigen::ArrayXd out = (x - mean).array() * scale;
  return out.min(clip).max(-clip).matrix();
}

GaussianPolicy::GaussianPolicy(int obs_dim, int act_dim, const std::vector<int>& hidden,
                               Rng& rng, double init_log_std)
    : obs_dim_(obs_dim), act_dim_(act_dim) {
  std::vector<int> actor_sizes{obs_dim};
  actor_sizes.insert(actor_sizes.end(), hidden.begin(), hidden.end());
  actor_sizes.push_back(act_dim);
  std::vector<int> critic_sizes{obs_dim};
  critic_sizes.insert(critic_sizes.end(), hidden.begin(), hidden.end());
  critic_sizes.push_back(1);

  actor = Mlp(actor_sizes);
  actor.init(rng, 0.01);  // small head keeps early commands near zero
  critic = Mlp(critic_sizes);
  critic.init(rng, 1.0);
  log_std = Eigen::VectorXd::Constant(act_dim, init_log_std);
}

void GaussianPolicy::sample(const Eigen::MatrixXd& mean, Rng& rng, Eigen::MatrixXd* actions,
                            Eigen::VectorXd* log_prob) const {
  const Eigen::ArrayXd sigma = log_std.array().exp();
  actions->resize(mean.rows(), mean.cols());
  for (Eigen::Index c = 0; c < mean.cols(); ++c) {
    for (Eigen::Index r = 0; r < mean.rows(); ++r) {
      (*actions)(r, c) = mean(r, c) + sigma[r] * rng.normal();
    }
  }
  if (log_prob) *log_prob = this->log_prob(mean, *actions);
}

Eigen::VectorXd GaussianPolicy::log_prob(const Eigen::MatrixXd& mean,
                                         const Eigen::MatrixXd& actions) const {
  const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();
  const Eigen::ArrayXXd diff = (actions - mean).array();
  Eigen::VectorXd lp =
      -0.5 * (diff.square().colwise() * inv_var).colwise().sum().transpose().matrix();
  const double norm_const = -log_std.sum() - 0.5 * kLog2Pi * static_cast<double>(act_dim_);
  lp.array() += norm_const;
  return lp;
}

double GaussianPolicy::entropy() const {
  return log_std.sum() + 0.5 * static_cast<double>(act_dim_) * (1.0 + kLog2Pi);
}

Eigen::VectorXd Checkpoint::act(const Eigen::VectorXd& obs) const {
  const Eigen::VectorXd normalized = normalizer.apply_one(obs);
  return policy.actor_mean(normalized);
}

namespace {

constexpr char kMagic[8] = {'T', 'S', 'C', 'K', '0', '0', '0', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i32(std::ofstream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  write_i32(out, static_cast<std::int32_t>(m.rows()));
  write_i32(out, static_cast<std::int32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}
void write_mlp(std::ofstream& out, const Mlp& net) {
  write_i32(out, net.num_layers());
  for (int l = 0; l < net.num_layers(); ++l) {
    write_matrix(out, net.weights[l]);
    write_matrix(out, net.biases[l]);
  }
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::int32_t read_i32(std::ifstream& in) {
  std::int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
double read_f64(std::ifstream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
Eigen::MatrixXd read_matrix(std::ifstream& in) {
  const std::int32_t rows = read_i32(in);
  const std::int32_t cols = read_i32(in);
  if (rows < 0 || cols < 0 || rows > 1 << 20 || cols > 1 << 20) {
    throw std::runtime_error("checkpoint: corrupt tensor header");
  }
  Eigen::MatrixXd m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_i32(out, static_cast<std::int32_t>(ckpt.variant.size()));
  out.write(ckpt.variant.data(), static_cast<std::streamsize>(ckpt.variant.size()));
  write_u64(out, ckpt.config_hash);
  write_i32(out, ckpt.policy.obs_dim());
  write_i32(out, ckpt.policy.act_dim());
  write_mlp(out, ckpt.policy.actor);
  write_mlp(out, ckpt.policy.critic);
  write_matrix(out, ckpt.policy.log_std);
  write_i32(out, ckpt.normalizer.enabled ? 1 : 0);
  write_f64(out, ckpt.normalizer.count);
  write_f64(out, ckpt.normalizer.clip);
  write_matrix(out, ckpt.normalizer.mean);
  write_matrix(out, ckpt.normalizer.var);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a throwsim checkpoint: " + path);
  }
  Checkpoint ckpt;
  const std::int32_t vlen = read_i32(in);
  if (vlen < 0 || vlen > 16) throw std::runtime_error("checkpoint: corrupt variant tag");
  ckpt.variant.resize(vlen);
  in.read(ckpt.variant.data(), vlen);
  ckpt.config_hash = read_u64(in);
  const std::int32_t obs_dim = read_i32(in);
  const std::int32_t act_dim = read_i32(in);

  auto read_mlp = [&in]() {
    Mlp net;
    const std::int32_t layers = read_i32(in);
    if (layers < 1 || layers > 64) throw std::runtime_error("checkpoint: corrupt layer count");
    std::vector<int> sizes;
    net.weights.resize(layers);
    net.biases.resize(layers);
    for (int l = 0; l < layers; ++l) {
      net.weights[l] = read_matrix(in);
      net.biases[l] = read_matrix(in);
      if (l == 0) sizes.push_back(static_cast<int>(net.weights[l].cols()));
      sizes.push_back(static_cast<int>(net.weights[l].rows()));
    }
    Mlp shaped(sizes);
    shaped.weights = net.weights;
    shaped.biases = net.biases;
    return shaped;
  };

  std::vector<int> hidden;
  Mlp actor = read_mlp();
  Mlp critic = read_mlp();
  for (int l = 0; l + 1 < actor.num_layers(); ++l) {
    hidden.push_back(static_cast<int>(actor.weights[l].rows()));
  }
  Rng dummy(0);
  ckpt.policy = GaussianPolicy(obs_dim, act_dim, hidden, dummy, 0.0);
  ckpt.policy.actor = std::move(actor);
  ckpt.policy.critic = std::move(critic);
  ckpt.policy.log_std = read_matrix(in);

  ckpt.normalizer.enabled = read_i32(in) != 0;
  ckpt.normalizer.count = read_f64(in);
  ckpt.normalizer.clip = read_f64(in);
  ckpt.normalizer.mean = read_matrix(in);
  ckpt.normalizer.var = read_matrix(in);
  if (!in) throw std::runtime_error("checkpoint truncated: " + path);
  return ckpt;
}

}  // namespace throwsim
