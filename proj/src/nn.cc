#include "rmlab/nn.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rmlab/json_util.h"

namespace rmlab::nn {

Tensor::Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  data.assign(n, 0.0);
}

NetSpec NetSpec::standard_cnn(const EnvConfig& env) {
  NetSpec s;
  s.input_rows = env.time_horizon;
  s.input_cols = env.image_width();
  s.conv_channels = {8, 16};
  s.kernel = 5;
  s.hidden = {72};
  s.num_actions = env.num_actions();
  return s;
}

NetSpec NetSpec::fully_connected(const EnvConfig& env, int hidden_units) {
  NetSpec s;
  s.input_rows = env.time_horizon;
  s.input_cols = env.image_width();
  s.hidden = {hidden_units};
  s.num_actions = env.num_actions();
  return s;
}

void to_json(nlohmann::json& j, const NetSpec& s) {
  j = {{"input_rows", s.input_rows}, {"input_cols", s.input_cols}, {"conv_channels", s.conv_channels},
       {"kernel", s.kernel},         {"hidden", s.hidden},         {"num_actions", s.num_actions}};
}

void from_json(const nlohmann::json& j, NetSpec& s) {
  require_known_keys(j, {"input_rows", "input_cols", "conv_channels", "kernel", "hidden", "num_actions"}, "net");
  s.input_rows = j.at("input_rows").get<int>();
  s.input_cols = j.at("input_cols").get<int>();
  s.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  s.kernel = j.at("kernel").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.num_actions = j.at("num_actions").get<int>();
}

std::string LayerShape::name() const {
  std::ostringstream os;
  switch (kind) {
    case LayerKind::Conv: os << "conv"; break;
    case LayerKind::Pool: os << "pool"; break;
    case LayerKind::Dense: os << (tanh ? "fc_tanh" : "fc_logits"); break;
  }
  os << '[' << out_rows << 'x' << out_cols << 'x' << out_channels << ']';
  return os.str();
}

std::size_t input_size(const NetSpec& spec) {
  return static_cast<std::size_t>(spec.input_rows) * spec.input_cols;
}

std::vector<double> image_to_input(const StateImage& image) {
  return {image.data.begin(), image.data.end()};
}

PolicyNet::PolicyNet(NetSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_rows < 1 || spec_.input_cols < 1 || spec_.num_actions < 1) {
    throw std::invalid_argument("net spec: non-positive sizes");
  }
  if (spec_.kernel < 1 || spec_.kernel % 2 == 0) throw std::invalid_argument("net spec: kernel must be odd");
  int rows = spec_.input_rows, cols = spec_.input_cols, channels = 1;
  std::size_t offset = 0;
  auto add_params = [&](LayerShape& l, std::size_t weights, std::size_t biases) {
    l.weight_offset = offset;
    l.weight_count = weights;
    l.bias_offset = offset + weights;
    l.bias_count = biases;
    offset += weights + biases;
  };
  for (int out_channels : spec_.conv_channels) {
    LayerShape conv{LayerKind::Conv, rows, cols, channels, rows, cols, out_channels};
    add_params(conv, static_cast<std::size_t>(spec_.kernel) * spec_.kernel * channels * out_channels, out_channels);
    layers_.push_back(conv);
    channels = out_channels;
    if (rows / 2 < 1 || cols / 2 < 1) throw std::invalid_argument("net spec: input too small for pooling");
    LayerShape pool{LayerKind::Pool, rows, cols, channels, rows / 2, cols / 2, channels};
    layers_.push_back(pool);
    rows /= 2;
    cols /= 2;
  }
  int width = rows * cols * channels;
  auto add_dense = [&](int units, bool use_tanh) {
    LayerShape dense{LayerKind::Dense, 1, 1, width, 1, 1, units, use_tanh};
    add_params(dense, static_cast<std::size_t>(width) * units, units);
    layers_.push_back(dense);
    width = units;
  };
  for (int units : spec_.hidden) add_dense(units, true);
  add_dense(spec_.num_actions, false);
  params_.assign(offset, 0.0);
}

void PolicyNet::initialize(std::uint64_t seed) {
  Rng rng(seed);
  std::fill(params_.begin(), params_.end(), 0.0);
  for (const auto& l : layers_) {
    if (l.weight_count == 0) continue;
    const double fan_in = l.kind == LayerKind::Conv
                              ? static_cast<double>(spec_.kernel) * spec_.kernel * l.in_channels
                              : static_cast<double>(l.in_size());
    std::uniform_real_distribution<double> dist(-std::sqrt(3.0 / fan_in), std::sqrt(3.0 / fan_in));
    for (std::size_t i = 0; i < l.weight_count; ++i) params_[l.weight_offset + i] = dist(rng);
  }
}

namespace {

template <int OCT>
void conv_forward_impl(const LayerShape& l, int kernel, const double* __restrict w, const double* __restrict b,
                       const double* __restrict in, double* __restrict out) {
  const int H = l.in_rows, W = l.in_cols, C = l.in_channels, pad = kernel / 2;
  const int OC = OCT > 0 ? OCT : l.out_channels;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double* o = out + (static_cast<std::size_t>(y) * W + x) * OC;
      double acc[OCT > 0 ? OCT : 1];
      double* a = OCT > 0 ? acc : o;
      for (int oc = 0; oc < OC; ++oc) a[oc] = b[oc];
      for (int ky = 0; ky < kernel; ++ky) {
        const int iy = y + ky - pad;
        if (iy < 0 || iy >= H) continue;
        const int kx0 = std::max(0, pad - x), kx1 = std::min(kernel, W + pad - x);
        for (int kx = kx0; kx < kx1; ++kx) {
          const int ix = x + kx - pad;
          const double* ip = in + (static_cast<std::size_t>(iy) * W + ix) * C;
          const double* wp = w + static_cast<std::size_t>(ky * kernel + kx) * C * OC;
          for (int ic = 0; ic < C; ++ic) {
            const double v = ip[ic];
            if (v == 0.0) continue;
            const double* wr = wp + static_cast<std::size_t>(ic) * OC;
            if constexpr (OCT > 0) {
              for (int oc = 0; oc < OCT; ++oc) acc[oc] += v * wr[oc];
            } else {
              for (int oc = 0; oc < OC; ++oc) o[oc] += v * wr[oc];
            }
          }
        }
      }
      for (int oc = 0; oc < OC; ++oc) o[oc] = std::max(a[oc], 0.0);
    }
  }
}

void conv_forward(const LayerShape& l, int kernel, const double* w, const double* b, const double* in,
                  double* out) {
  switch (l.out_channels) {
    case 8: conv_forward_impl<8>(l, kernel, w, b, in, out); break;
    case 16: conv_forward_impl<16>(l, kernel, w, b, in, out); break;
    default: conv_forward_impl<0>(l, kernel, w, b, in, out); break;
  }
}

// dz: gradient at the pre-activation. grad_in may be null (first layer).
template <int OCT>
void conv_backward_impl(const LayerShape& l, int kernel, const double* __restrict w, const double* __restrict in,
                        const double* __restrict dz, double* __restrict dw, double* __restrict db,
                        double* __restrict grad_in, double sign) {
  const int H = l.in_rows, W = l.in_cols, C = l.in_channels, pad = kernel / 2;
  const int OC = OCT > 0 ? OCT : l.out_channels;
  if (grad_in) std::fill(grad_in, grad_in + l.in_size(), 0.0);
  double sg[OCT > 0 ? OCT : 1];
  std::vector<double> sg_dyn(OCT > 0 ? 0 : OC);
  double* sgp = OCT > 0 ? sg : sg_dyn.data();
  // Weights transposed to [ky][kx][oc][ic] so the input-gradient update is a
  // contiguous axpy over input channels.
  thread_local std::vector<double> wt;
  if (grad_in) {
    wt.resize(static_cast<std::size_t>(kernel) * kernel * C * OC);
    for (int k = 0; k < kernel * kernel; ++k) {
      for (int ic = 0; ic < C; ++ic) {
        for (int oc = 0; oc < OC; ++oc) {
          wt[(static_cast<std::size_t>(k) * OC + oc) * C + ic] = w[(static_cast<std::size_t>(k) * C + ic) * OC + oc];
        }
      }
    }
  }
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double* g = dz + (static_cast<std::size_t>(y) * W + x) * OC;
      bool any = false;
      for (int oc = 0; oc < OC; ++oc) any = any || g[oc] != 0.0;
      if (!any) continue;
      for (int oc = 0; oc < OC; ++oc) {
        db[oc] += g[oc];
        sgp[oc] = sign * g[oc];
      }
      for (int ky = 0; ky < kernel; ++ky) {
        const int iy = y + ky - pad;
        if (iy < 0 || iy >= H) continue;
        const int kx0 = std::max(0, pad - x), kx1 = std::min(kernel, W + pad - x);
        for (int kx = kx0; kx < kx1; ++kx) {
          const int ix = x + kx - pad;
          const std::size_t in_off = (static_cast<std::size_t>(iy) * W + ix) * C;
          const std::size_t w_off = static_cast<std::size_t>(ky * kernel + kx) * C * OC;
          for (int ic = 0; ic < C; ++ic) {
            const double v = in[in_off + ic];
            if (v == 0.0) continue;
            double* dwr = dw + w_off + static_cast<std::size_t>(ic) * OC;
            for (int oc = 0; oc < OC; ++oc) dwr[oc] += v * sgp[oc];
          }
          if (grad_in) {
            double* gi = grad_in + in_off;
            const double* wk = wt.data() + w_off;
            for (int oc = 0; oc < OC; ++oc) {
              const double go = g[oc];
              const double* wr = wk + static_cast<std::size_t>(oc) * C;
              for (int ic = 0; ic < C; ++ic) gi[ic] += wr[ic] * go;
            }
          }
        }
      }
    }
  }
}

void conv_backward(const LayerShape& l, int kernel, const double* w, const double* in, const double* dz,
                   double* dw, double* db, double* grad_in, double sign) {
  switch (l.out_channels) {
    case 8: conv_backward_impl<8>(l, kernel, w, in, dz, dw, db, grad_in, sign); break;
    case 16: conv_backward_impl<16>(l, kernel, w, in, dz, dw, db, grad_in, sign); break;
    default: conv_backward_impl<0>(l, kernel, w, in, dz, dw, db, grad_in, sign); break;
  }
}

void dense_forward(const LayerShape& l, const double* w, const double* b, const double* in, double* out) {
  const std::size_t n_in = l.in_size();
  for (int j = 0; j < l.out_channels; ++j) {
    const double* row = w + j * n_in;
    double acc = b[j];
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
    out[j] = l.tanh ? std::tanh(acc) : acc;
  }
}

void dense_backward(const LayerShape& l, const double* w, const double* in, const double* dz, double* dw,
                    double* db, double* grad_in, double sign) {
  const std::size_t n_in = l.in_size();
  if (grad_in) std::fill(grad_in, grad_in + n_in, 0.0);
  for (int j = 0; j < l.out_channels; ++j) {
    const double g = dz[j];
    if (g == 0.0) continue;
    db[j] += g;
    double* dwr = dw + j * n_in;
    const double sg = sign * g;
    for (std::size_t i = 0; i < n_in; ++i) dwr[i] += sg * in[i];
    if (grad_in) {
      const double* row = w + j * n_in;
      for (std::size_t i = 0; i < n_in; ++i) grad_in[i] += g * row[i];
    }
  }
}

void softmax(std::span<const double> logits, std::vector<double>& probs) {
  probs.resize(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += probs[i] = std::exp(logits[i] - m);
  for (auto& p : probs) p /= sum;
}

}  // namespace

void pool_forward(const LayerShape& l, const double* in, double* out) {
  const int W = l.in_cols, C = l.in_channels;
  for (int y = 0; y < l.out_rows; ++y) {
    for (int x = 0; x < l.out_cols; ++x) {
      double* o = out + (static_cast<std::size_t>(y) * l.out_cols + x) * C;
      const double* a = in + (static_cast<std::size_t>(2 * y) * W + 2 * x) * C;
      const double* b = a + C;
      const double* c = a + static_cast<std::size_t>(W) * C;
      const double* d = c + C;
      for (int ch = 0; ch < C; ++ch) o[ch] = 0.25 * (a[ch] + b[ch] + c[ch] + d[ch]);
    }
  }
}

void pool_backward(const LayerShape& l, const double* grad_out, double* grad_in) {
  const int W = l.in_cols, C = l.in_channels;
  std::fill(grad_in, grad_in + l.in_size(), 0.0);
  for (int y = 0; y < l.out_rows; ++y) {
    for (int x = 0; x < l.out_cols; ++x) {
      const double* g = grad_out + (static_cast<std::size_t>(y) * l.out_cols + x) * C;
      double* a = grad_in + (static_cast<std::size_t>(2 * y) * W + 2 * x) * C;
      double* b = a + C;
      double* c = a + static_cast<std::size_t>(W) * C;
      double* d = c + C;
      for (int ch = 0; ch < C; ++ch) {
        const double q = 0.25 * g[ch];
        a[ch] += q;
        b[ch] += q;
        c[ch] += q;
        d[ch] += q;
      }
    }
  }
}

std::span<const double> PolicyNet::forward(std::span<const double> input, ForwardCache& cache) const {
  if (input.size() != input_size(spec_)) {
    throw std::invalid_argument("forward: input has " + std::to_string(input.size()) + " values, net expects " +
                                std::to_string(input_size(spec_)));
  }
  cache.activations.resize(layers_.size() + 1);
  cache.activations[0].assign(input.begin(), input.end());
  const double* p = params_.data();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    auto& out = cache.activations[i + 1];
    out.resize(l.out_size());
    const double* in = cache.activations[i].data();
    switch (l.kind) {
      case LayerKind::Conv:
        conv_forward(l, spec_.kernel, p + l.weight_offset, p + l.bias_offset, in, out.data());
        break;
      case LayerKind::Pool: pool_forward(l, in, out.data()); break;
      case LayerKind::Dense: dense_forward(l, p + l.weight_offset, p + l.bias_offset, in, out.data()); break;
    }
  }
  softmax(cache.activations.back(), cache.probs);
  cache.valid = true;
  return cache.probs;
}

std::span<const double> PolicyNet::forward(const StateImage& image, ForwardCache& cache) const {
  if (image.rows != spec_.input_rows || image.cols != spec_.input_cols) {
    throw std::invalid_argument("forward: image " + std::to_string(image.rows) + "x" + std::to_string(image.cols) +
                                " does not match net input " + std::to_string(spec_.input_rows) + "x" +
                                std::to_string(spec_.input_cols));
  }
  thread_local std::vector<double> input;
  input.assign(image.data.begin(), image.data.end());
  return forward(input, cache);
}

void PolicyNet::backward(ForwardCache& cache, std::span<const double> logit_grad, Gradients& grads) const {
  if (!cache.valid || cache.activations.size() != layers_.size() + 1) {
    throw std::logic_error("backward: no forward cache for this network");
  }
  if (logit_grad.size() != static_cast<std::size_t>(spec_.num_actions)) {
    throw std::invalid_argument("backward: logit gradient size mismatch");
  }
  if (grads.values.size() != params_.size()) throw std::invalid_argument("backward: gradient buffer size mismatch");
  std::vector<double>& g = cache.grad_a;
  std::vector<double>& g_in = cache.grad_b;
  g.assign(logit_grad.begin(), logit_grad.end());
  const double* p = params_.data();
  double* d = grads.values.data();
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const auto& l = layers_[idx];
    const auto& in = cache.activations[idx];
    const auto& out = cache.activations[idx + 1];
    const double sign = (fault_layer_ && *fault_layer_ == static_cast<int>(idx)) ? -1.0 : 1.0;
    const bool need_input_grad = idx > 0;
    g_in.resize(l.in_size());
    switch (l.kind) {
      case LayerKind::Conv:
        for (std::size_t j = 0; j < g.size(); ++j) g[j] = out[j] > 0.0 ? g[j] : 0.0;
        conv_backward(l, spec_.kernel, p + l.weight_offset, in.data(), g.data(), d + l.weight_offset,
                      d + l.bias_offset, need_input_grad ? g_in.data() : nullptr, sign);
        break;
      case LayerKind::Pool: pool_backward(l, g.data(), g_in.data()); break;
      case LayerKind::Dense:
        if (l.tanh) {
          for (std::size_t j = 0; j < g.size(); ++j) g[j] *= 1.0 - out[j] * out[j];
        }
        dense_backward(l, p + l.weight_offset, in.data(), g.data(), d + l.weight_offset, d + l.bias_offset,
                       need_input_grad ? g_in.data() : nullptr, sign);
        break;
    }
    std::swap(g, g_in);
  }
}

std::uint64_t PolicyNet::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  const auto* bytes = reinterpret_cast<const unsigned char*>(params_.data());
  for (std::size_t i = 0; i < params_.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void cross_entropy_logit_grad(std::span<const double> probs, int target, std::span<double> out) {
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] - (static_cast<int>(i) == target ? 1.0 : 0.0);
}

void log_prob_logit_grad(std::span<const double> probs, int action, double weight, std::span<double> out) {
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = weight * ((static_cast<int>(i) == action ? 1.0 : 0.0) - probs[i]);
  }
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

int argmax(std::span<const double> probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

OptimizerState make_optimizer(const PolicyNet& net, OptimizerConfig config) {
  return {config, std::vector<double>(net.num_params(), 0.0), 0};
}

UpdateResult apply_update(PolicyNet& net, OptimizerState& state, const Gradients& grads, Direction direction) {
  auto params = net.params();
  if (grads.values.size() != params.size() || state.second_moment.size() != params.size()) {
    throw std::invalid_argument("apply_update: shape mismatch");
  }
  for (std::size_t i = 0; i < grads.values.size(); ++i) {
    if (!std::isfinite(grads.values[i])) {
      return {false, "non-finite gradient at parameter " + std::to_string(i) + "; update skipped"};
    }
  }
  const auto& c = state.config;
  const double sign = direction == Direction::Ascent ? 1.0 : -1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads.values[i];
    if (c.plain_sgd) {
      params[i] += sign * c.learning_rate * g;
    } else {
      double& m = state.second_moment[i];
      m = c.decay * m + (1.0 - c.decay) * g * g;
      params[i] += sign * c.learning_rate * g / (std::sqrt(m) + c.epsilon);
    }
  }
  ++state.updates;
  return {true, {}};
}

double head_value(std::span<const double> probs, const Head& head) {
  const double lp = std::log(probs[head.action]);
  return head.kind == HeadKind::CrossEntropy ? -lp : head.weight * lp;
}

void head_logit_grad(std::span<const double> probs, const Head& head, std::span<double> out) {
  if (head.kind == HeadKind::CrossEntropy) {
    cross_entropy_logit_grad(probs, head.action, out);
  } else {
    log_prob_logit_grad(probs, head.action, head.weight, out);
  }
}

GradCheckReport grad_check(const PolicyNet& net, std::span<const double> input, const Head& head, double tolerance,
                           double step) {
  GradCheckReport report;
  ForwardCache cache;
  auto probs = net.forward(input, cache);
  std::vector<double> dlogits(probs.size());
  head_logit_grad(probs, head, dlogits);
  Gradients analytic = net.make_gradients();
  net.backward(cache, dlogits, analytic);

  PolicyNet probe = net;
  probe.inject_backward_fault(std::nullopt);
  auto theta = probe.params();
  auto layer_of = [&](std::size_t i) {
    for (const auto& l : net.layers()) {
      if (i >= l.weight_offset && i < l.bias_offset + l.bias_count) return l.name();
    }
    return std::string("?");
  };
  // Relu on/off pattern of every conv output; a change means the stencil
  // straddles a kink and the central difference is meaningless there.
  auto relu_pattern = [&](const ForwardCache& c) {
    std::vector<bool> on;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      if (net.layers()[l].kind != LayerKind::Conv) continue;
      for (double v : c.activations[l + 1]) on.push_back(v > 0.0);
    }
    return on;
  };
  const auto base_pattern = relu_pattern(cache);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    const double plus = head_value(probe.forward(input, cache), head);
    bool kink = relu_pattern(cache) != base_pattern;
    theta[i] = saved - step;
    const double minus = head_value(probe.forward(input, cache), head);
    kink = kink || relu_pattern(cache) != base_pattern;
    theta[i] = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    const double a = analytic.values[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    const double rel = std::abs(a - numeric) / denom;
    if (kink && rel >= tolerance) {
      ++report.skipped_kinks;
      continue;
    }
    ++report.checked;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_param = i;
      report.worst_layer = layer_of(i);
    }
  }
  report.passed = report.max_relative_error < tolerance && report.skipped_kinks * 100 <= report.checked;
  return report;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

nlohmann::json checkpoint_to_json(const PolicyNet& net, const OptimizerState* optimizer, const nlohmann::json& meta) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"name", l.name()},
                      {"in", {l.in_rows, l.in_cols, l.in_channels}},
                      {"out", {l.out_rows, l.out_cols, l.out_channels}},
                      {"weights", l.weight_count},
                      {"biases", l.bias_count}});
  }
  auto p = net.params();
  nlohmann::json j = {{"format", "rmlab-policy"},
                      {"version", 1},
                      {"spec", net.spec()},
                      {"layers", std::move(layers)},
                      {"params", std::vector<double>(p.begin(), p.end())},
                      {"hash", hash_hex(net.hash())}};
  if (optimizer) {
    const auto& c = optimizer->config;
    j["optimizer"] = {{"learning_rate", c.learning_rate}, {"decay", c.decay},   {"epsilon", c.epsilon},
                      {"plain_sgd", c.plain_sgd},         {"updates", optimizer->updates},
                      {"second_moment", optimizer->second_moment}};
  }
  if (!meta.is_null()) j["meta"] = meta;
  return j;
}

PolicyNet net_from_checkpoint(const nlohmann::json& j) {
  if (j.value("format", "") != "rmlab-policy") throw std::runtime_error("checkpoint: unknown format");
  PolicyNet net(j.at("spec").get<NetSpec>());
  auto values = j.at("params").get<std::vector<double>>();
  if (values.size() != net.num_params()) throw std::runtime_error("checkpoint: parameter count mismatch");
  std::copy(values.begin(), values.end(), net.params().begin());
  if (j.at("hash").get<std::string>() != hash_hex(net.hash())) throw std::runtime_error("checkpoint: hash mismatch");
  return net;
}

std::optional<OptimizerState> optimizer_from_checkpoint(const nlohmann::json& j) {
  if (!j.contains("optimizer")) return std::nullopt;
  const auto& o = j.at("optimizer");
  OptimizerState s;
  s.config.learning_rate = o.at("learning_rate").get<double>();
  s.config.decay = o.at("decay").get<double>();
  s.config.epsilon = o.at("epsilon").get<double>();
  s.config.plain_sgd = o.at("plain_sgd").get<bool>();
  s.updates = o.at("updates").get<long>();
  s.second_moment = o.at("second_moment").get<std::vector<double>>();
  return s;
}

void save_checkpoint(const std::string& path, const PolicyNet& net, const OptimizerState* optimizer,
                     const nlohmann::json& meta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << checkpoint_to_json(net, optimizer, meta).dump();
  if (!out) throw std::runtime_error("write failed for " + path);
}

nlohmann::json load_checkpoint_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  return nlohmann::json::parse(in);
}

}  // namespace rmlab::nn
