#pragma once

#include "hems/util.hpp"

namespace hems {

// Hidden layers are always ReLU; the enum picks the output head.
enum class Activation { relu_hidden_tanh_out, relu_hidden_linear_out };
enum class Optimizer { sgd, adam };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

class Mlp;

// Parameter-shaped gradient accumulator. backward() adds into it so a
// minibatch accumulates naturally; scale(1/batch) turns sums into means.
struct GradSet {
  std::vector<std::vector<double>> w;  // row-major [out*in], one per layer
  std::vector<std::vector<double>> b;

  void match(const Mlp& net);  // allocate/zero to the net's shapes
  void zero();
  void scale(double s);
};

// Reusable buffers for forward/backward so the training loop never
// allocates. act[l] holds layer-l activations (act[0] is the input copy);
// input_grad is d(output.upstream)/d(input) of the latest backward call.
struct MlpWorkspace {
  std::vector<std::vector<double>> act;
  std::vector<std::vector<double>> delta;
  std::vector<double> input_grad;
};

// Fully connected network with explicit reverse-mode gradients; the whole
// DRL stack trains through this class.
class Mlp {
 public:
  Mlp() = default;
  // He-style hidden init, small-uniform output layer, zero biases.
  Mlp(std::vector<std::size_t> sizes, Activation act, Rng& rng);

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  Activation activation() const { return act_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return w_.size(); }

  std::vector<std::vector<double>>& weights() { return w_; }
  const std::vector<std::vector<double>>& weights() const { return w_; }
  std::vector<std::vector<double>>& biases() { return b_; }
  const std::vector<std::vector<double>>& biases() const { return b_; }

  void prepare(MlpWorkspace& ws) const;

  // Deterministic forward pass; returns act.back().
  const std::vector<double>& forward(const double* x, MlpWorkspace& ws) const;
  std::vector<double> forward(const std::vector<double>& x) const;

  // Accumulates gradients of output.upstream into g and writes the input
  // gradient into ws.input_grad. Requires act from a forward() on x.
  void backward(const double* x, const double* upstream, MlpWorkspace& ws, GradSet& g) const;

  // Input gradient only (ws.input_grad), parameters untouched; the cheap
  // path for the critic's action gradient in the actor update.
  void backward_input(const double* upstream, MlpWorkspace& ws) const;

  // In-place parameter update; throws Status::diverged on non-finite
  // gradients or parameters (training abort signal).
  void apply_update(const GradSet& g, double lr, Optimizer opt);

  // Adam moment buffers and step count, exposed for checkpointing.
  std::vector<std::vector<double>>& adam_mw() { return mw_; }
  std::vector<std::vector<double>>& adam_vw() { return vw_; }
  std::vector<std::vector<double>>& adam_mb() { return mb_; }
  std::vector<std::vector<double>>& adam_vb() { return vb_; }
  const std::vector<std::vector<double>>& adam_mw() const { return mw_; }
  const std::vector<std::vector<double>>& adam_vw() const { return vw_; }
  const std::vector<std::vector<double>>& adam_mb() const { return mb_; }
  const std::vector<std::vector<double>>& adam_vb() const { return vb_; }
  long adam_steps() const { return adam_t_; }
  void set_adam_steps(long t) { adam_t_ = t; }

 private:
  void ensure_adam_state();

  std::vector<std::size_t> sizes_;
  Activation act_ = Activation::relu_hidden_linear_out;
  std::vector<std::vector<double>> w_, b_;
  std::vector<std::vector<double>> mw_, vw_, mb_, vb_;
  long adam_t_ = 0;
};

// target <- tau*source + (1-tau)*target, elementwise over parameters.
void soft_update(Mlp& target, const Mlp& source, double tau);

// Versioned text checkpoint (architecture header, parameters, optimizer
// state); round-trips bit-exactly.
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace hems
