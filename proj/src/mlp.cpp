#include "throwsim/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace throwsim {

Mlp::Mlp(const std::vector<int>& layer_sizes) : layer_sizes_(layer_sizes) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("Mlp: need at least two layer sizes");
  const int n = static_cast<int>(layer_sizes.size()) - 1;
  weights.resize(n);
  biases.resize(n);
  for (int l = 0; l < n; ++l) {
    weights[l] = Eigen::MatrixXd::Zero(layer_sizes[l + 1], layer_sizes[l]);
    biases[l] = Eigen::VectorXd::Zero(layer_sizes[l + 1]);
  }
}

void Mlp::init(Rng& rng, double output_gain) {
  for (int l = 0; l < num_layers(); ++l) {
    const double fan_in = static_cast<double>(weights[l].cols());
    const double fan_out = static_cast<double>(weights[l].rows());
    double std = std::sqrt(2.0 / (fan_in + fan_out));
    if (l == num_layers() - 1) std *= output_gain;
    for (Eigen::Index i = 0; i < weights[l].size(); ++i) {
      weights[l].data()[i] = rng.normal(0.0, std);
    }
    biases[l].setZero();
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Workspace* ws) const {
  if (input.rows() != input_size()) throw std::invalid_argument("Mlp::forward: input shape");
  if (ws) {
    ws->acts.resize(num_layers() + 1);
    ws->acts[0] = input;
  }
  Eigen::MatrixXd x = input;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weights[l] * x;
    z.colwise() += biases[l];
    if (l + 1 < num_layers()) tanh_inplace(z);
    x = std::move(z);
    if (ws) ws->acts[l + 1] = x;
  }
  return x;
}

Mlp::Grads Mlp::make_grads() const {
  Grads g;
  g.dW.resize(num_layers());
  g.db.resize(num_layers());
  for (int l = 0; l < num_layers(); ++l) {
    g.dW[l] = Eigen::MatrixXd::Zero(weights[l].rows(), weights[l].cols());
    g.db[l] = Eigen::VectorXd::Zero(biases[l].size());
  }
  return g;
}

void Mlp::backward(const Workspace& ws, const Eigen::MatrixXd& d_output, Grads& grads,
                   Eigen::MatrixXd* d_input) const {
  if (static_cast<int>(ws.acts.size()) != num_layers() + 1) {
    throw std::invalid_argument("Mlp::backward: workspace not populated by forward");
  }
  Eigen::MatrixXd delta = d_output;
  for (int l = num_layers() - 1; l >= 0; --l) {
    grads.dW[l].noalias() += delta * ws.acts[l].transpose();
    grads.db[l].noalias() += delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd prev = weights[l].transpose() * delta;
      prev.array() *= 1.0 - ws.acts[l].array().square();  // tanh'
      delta = std::move(prev);
    } else if (d_input) {
      d_input->noalias() = weights[0].transpose() * delta;
    }
  }
}

int AdamState::register_param(Eigen::Index rows, Eigen::Index cols) {
  Slot slot;
  slot.m = Eigen::MatrixXd::Zero(rows, cols);
  slot.v = Eigen::MatrixXd::Zero(rows, cols);
  slots_.push_back(std::move(slot));
  return static_cast<int>(slots_.size()) - 1;
}

void AdamState::begin_step() { ++t_; }

void AdamState::update(int slot_index, Eigen::Ref<Eigen::MatrixXd> param,
                       const Eigen::MatrixXd& grad, double lr) {
  Slot& s = slots_.at(slot_index);
  s.m = opt_.beta1 * s.m + (1.0 - opt_.beta1) * grad;
  s.v = opt_.beta2 * s.v.array().matrix() + (1.0 - opt_.beta2) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(opt_.beta1, t_);
  const double bc2 = 1.0 - std::pow(opt_.beta2, t_);
  param.array() -= lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + opt_.eps);
}

}  // namespace throwsim
