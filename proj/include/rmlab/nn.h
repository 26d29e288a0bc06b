#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmlab/environment.h"
#include "rmlab/rng.h"

namespace rmlab::nn {

// Row-major dense array. Activations are laid out [rows][cols][channels].
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_);
  std::size_t size() const { return data.size(); }
};

// Network topology. Each conv is 5x5 (same padding) + relu followed by a 2x2
// average pool with stride 2; dense hidden layers use tanh; the output layer
// produces logits for a softmax over actions.
struct NetSpec {
  int input_rows = 0;
  int input_cols = 0;
  std::vector<int> conv_channels;
  int kernel = 5;
  std::vector<int> hidden;
  int num_actions = 0;

  bool operator==(const NetSpec&) const = default;

  // Conv(8)-Pool-Conv(16)-Pool-FC(72, tanh)-FC(num_slots+1, softmax).
  static NetSpec standard_cnn(const EnvConfig& env);
  // Single hidden layer, fully connected.
  static NetSpec fully_connected(const EnvConfig& env, int hidden_units = 20);
};

void to_json(nlohmann::json& j, const NetSpec& s);
void from_json(const nlohmann::json& j, NetSpec& s);

enum class LayerKind { Conv, Pool, Dense };

struct LayerShape {
  LayerKind kind = LayerKind::Dense;
  int in_rows = 1, in_cols = 1, in_channels = 1;
  int out_rows = 1, out_cols = 1, out_channels = 1;
  bool tanh = false;                   // dense activation; conv is always relu
  std::size_t weight_offset = 0, weight_count = 0;
  std::size_t bias_offset = 0, bias_count = 0;

  std::size_t in_size() const { return static_cast<std::size_t>(in_rows) * in_cols * in_channels; }
  std::size_t out_size() const { return static_cast<std::size_t>(out_rows) * out_cols * out_channels; }
  std::string name() const;
};

// Per-call activations. One cache per thread; forward/backward never write
// to the network.
struct ForwardCache {
  std::vector<std::vector<double>> activations;  // [0] = input, [i+1] = output of layer i
  std::vector<double> probs;
  bool valid = false;
  // Scratch for backward.
  std::vector<double> grad_a, grad_b;
};

struct Gradients {
  std::vector<double> values;
  void zero() { std::fill(values.begin(), values.end(), 0.0); }
};

class PolicyNet {
 public:
  PolicyNet() = default;
  explicit PolicyNet(NetSpec spec);

  const NetSpec& spec() const { return spec_; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t num_params() const { return params_.size(); }
  Gradients make_gradients() const { return {std::vector<double>(params_.size(), 0.0)}; }

  // Fan-in scaled uniform weights, zero biases.
  void initialize(std::uint64_t seed);

  // Returns the action distribution (also kept in cache.probs).
  std::span<const double> forward(std::span<const double> input, ForwardCache& cache) const;
  std::span<const double> forward(const StateImage& image, ForwardCache& cache) const;

  // Accumulates d(scalar)/d(theta) into grads given d(scalar)/d(logits).
  void backward(ForwardCache& cache, std::span<const double> logit_grad, Gradients& grads) const;

  std::uint64_t hash() const;

  // Test hook: flips the sign of a layer's weight gradient.
  void inject_backward_fault(std::optional<int> layer) { fault_layer_ = layer; }

  bool operator==(const PolicyNet& other) const { return spec_ == other.spec_ && params_ == other.params_; }

 private:
  NetSpec spec_;
  std::vector<LayerShape> layers_;
  std::vector<double> params_;
  std::optional<int> fault_layer_;
};

// 2x2 average pool, stride 2, over [rows][cols][channels]; odd edges are dropped.
void pool_forward(const LayerShape& l, const double* in, double* out);
// Each input cell of a window receives a quarter of the output gradient.
void pool_backward(const LayerShape& l, const double* grad_out, double* grad_in);

std::size_t input_size(const NetSpec& spec);
std::vector<double> image_to_input(const StateImage& image);

// d(-log p_target)/d(logits) = p - onehot(target).
void cross_entropy_logit_grad(std::span<const double> probs, int target, std::span<double> out);
// d(weight * log p_action)/d(logits) = weight * (onehot(action) - p).
void log_prob_logit_grad(std::span<const double> probs, int action, double weight, std::span<double> out);

double entropy(std::span<const double> probs);
int argmax(std::span<const double> probs);

enum class Direction { Ascent, Descent };

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double decay = 0.9;
  double epsilon = 1e-8;
  bool plain_sgd = false;

  bool operator==(const OptimizerConfig&) const = default;
};

struct OptimizerState {
  OptimizerConfig config;
  std::vector<double> second_moment;
  long updates = 0;
};

OptimizerState make_optimizer(const PolicyNet& net, OptimizerConfig config);

struct UpdateResult {
  bool applied = false;
  std::string diagnostic;
};

// RMS-scaled step (or plain theta +/- alpha*g). Non-finite gradients leave
// both parameters and accumulators untouched.
UpdateResult apply_update(PolicyNet& net, OptimizerState& state, const Gradients& grads, Direction direction);

enum class HeadKind { CrossEntropy, LogProb };

struct Head {
  HeadKind kind = HeadKind::CrossEntropy;
  int action = 0;       // target (cross-entropy) or taken action (log-prob)
  double weight = 1.0;  // log-prob head only
};

// Scalar whose gradient the head defines: -log p_a, or weight * log p_a.
double head_value(std::span<const double> probs, const Head& head);
void head_logit_grad(std::span<const double> probs, const Head& head, std::span<double> out);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::string worst_layer;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // disagreeing partials whose stencil crossed a relu kink
  bool passed = true;
};

// Compares every analytic partial against a central difference. Partials whose
// stencil flips a relu and disagree are skipped; more than 1% skipped fails.
GradCheckReport grad_check(const PolicyNet& net, std::span<const double> input, const Head& head,
                           double tolerance = 1e-4, double step = 1e-4);

nlohmann::json checkpoint_to_json(const PolicyNet& net, const OptimizerState* optimizer = nullptr,
                                  const nlohmann::json& meta = {});
PolicyNet net_from_checkpoint(const nlohmann::json& j);
std::optional<OptimizerState> optimizer_from_checkpoint(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const PolicyNet& net, const OptimizerState* optimizer = nullptr,
                     const nlohmann::json& meta = {});
nlohmann::json load_checkpoint_json(const std::string& path);

std::string hash_hex(std::uint64_t h);

}  // namespace rmlab::nn
