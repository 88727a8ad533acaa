#pragma once

#include <Eigen/Dense>
#include <vector>

#include "throwsim/rng.hpp"

namespace throwsim {

// Dense tanh network operating on column-batched inputs (one sample per
// column). Hidden activations are tanh, the output layer is linear.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(const std::vector<int>& layer_sizes);

  // Xavier-style Gaussian init; `output_gain` scales the last layer (small
  // values keep initial policy outputs near zero).
  void init(Rng& rng, double output_gain = 1.0);

  int input_size() const { return layer_sizes_.front(); }
  int output_size() const { return layer_sizes_.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }

  // Post-activation values per layer; acts[0] is the input batch.
  struct Workspace {
    std::vector<Eigen::MatrixXd> acts;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Workspace* ws = nullptr) const;

  struct Grads {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    void setZero() {
      for (auto& g : dW) g.setZero();
      for (auto& g : db) g.setZero();
    }
  };
  Grads make_grads() const;

  // Backpropagates dL/doutput through the cached workspace, accumulating into
  // `grads`; optionally returns dL/dinput.
  void backward(const Workspace& ws, const Eigen::MatrixXd& d_output, Grads& grads,
                Eigen::MatrixXd* d_input = nullptr) const;

  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

 private:
  std::vector<int> layer_sizes_;
};

// Vectorized tanh via exp (Eigen vectorizes double exp but not double tanh);
// accurate to ~1 ulp against std::tanh.
inline void tanh_inplace(Eigen::MatrixXd& x) {
  x.array() = 1.0 - 2.0 / ((2.0 * x.array()).exp() + 1.0);
}

// Adam with bias correction over an ordered set of parameter tensors.
class AdamState {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit AdamState(Options options = {}) : opt_(options) {}

  // Parameters must be registered once, in a fixed order.
  int register_param(Eigen::Index rows, Eigen::Index cols);
  void begin_step();  // advances the shared timestep
  void update(int slot, Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
              double lr);
  int timestep() const { return t_; }

 private:
  struct Slot {
    Eigen::MatrixXd m, v;
  };
  Options opt_;
  std::vector<Slot> slots_;
  int t_ = 0;
};

}  // namespace throwsim
