#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pairnet/common.hpp"

namespace pairnet {

/// Two-layer feed-forward network with tanh on the hidden and output layers:
///   y = tanh(W2 * tanh(W1 * x + b1) + b2)
/// The same struct doubles as a gradient of matching shape.
struct MlpParams {
  Matrix w1;  // hidden x input
  std::vector<double> b1;
  Matrix w2;  // output x hidden
  std::vector<double> b2;

  std::size_t input_dim() const noexcept { return w1.cols(); }
  std::size_t hidden_dim() const noexcept { return w1.rows(); }
  std::size_t output_dim() const noexcept { return w2.rows(); }

  static MlpParams zeros(std::size_t input, std::size_t hidden, std::size_t output) {
    return {Matrix(hidden, input), std::vector<double>(hidden, 0.0), Matrix(output, hidden),
            std::vector<double>(output, 0.0)};
  }

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (double& v : w1.data()) fn(v);
    for (double& v : b1) fn(v);
    for (double& v : w2.data()) fn(v);
    for (double& v : b2) fn(v);
  }

  bool all_finite() const {
    auto finite = [](std::span<const double> s) {
      return std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); });
    };
    return finite(w1.data()) && finite(b1) && finite(w2.data()) && finite(b2);
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::size_t batch_size = 16;  // 0 = full batch
  std::optional<double> weight_init_scale;  // unset: 1/sqrt(fan_in) per layer
  std::uint64_t seed = 1;
  double l2 = 1e-4;
  std::size_t hidden = 8;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw Error(Errc::InvalidArgument, "learning_rate must be positive");
    if (epochs < 1) throw Error(Errc::InvalidArgument, "epochs must be >= 1");
    if (!(l2 >= 0.0)) throw Error(Errc::InvalidArgument, "l2 must be non-negative");
    if (hidden < 1) throw Error(Errc::InvalidArgument, "hidden size must be >= 1");
    if (weight_init_scale && !(*weight_init_scale >= 0.0))
      throw Error(Errc::InvalidArgument, "weight_init_scale must be non-negative");
  }
};

/// Inputs and targets share row indices; targets live in [-1, 1].
struct TrainingSet {
  Matrix inputs;
  Matrix targets;

  std::size_t size() const noexcept { return inputs.rows(); }
};

/// Weights uniform in [-scale, scale] (default 1/sqrt(fan_in)), biases zero.
inline MlpParams init_mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                          std::uint64_t seed, std::optional<double> scale = std::nullopt) {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 1)
    throw Error(Errc::InvalidArgument, "network dimensions must be >= 1");
  auto net = MlpParams::zeros(input_dim, hidden_dim, output_dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s1 = scale.value_or(1.0 / std::sqrt(static_cast<double>(input_dim)));
  const double s2 = scale.value_or(1.0 / std::sqrt(static_cast<double>(hidden_dim)));
  for (double& w : net.w1.data()) w = s1 * (2.0 * unit(rng) - 1.0);
  for (double& w : net.w2.data()) w = s2 * (2.0 * unit(rng) - 1.0);
  return net;
}

namespace detail {

// tanh saturates to exactly +-1 in double precision for |z| > ~19; keep outputs open.
inline constexpr double kOutputBound = 1.0 - 0x1p-53;

inline double bounded_tanh(double z) { return std::clamp(std::tanh(z), -kOutputBound, kOutputBound); }

inline void hidden_layer(const MlpParams& net, std::span<const double> x, std::span<double> h) {
  for (std::size_t j = 0; j < net.hidden_dim(); ++j) h[j] = std::tanh(dot(net.w1.row(j), x) + net.b1[j]);
}

inline void output_layer(const MlpParams& net, std::span<const double> h, std::span<double> y) {
  for (std::size_t k = 0; k < net.output_dim(); ++k) y[k] = bounded_tanh(dot(net.w2.row(k), h) + net.b2[k]);
}

}  // namespace detail

inline std::vector<double> forward(const MlpParams& net, std::span<const double> x) {
  if (x.size() != net.input_dim())
    throw Error(Errc::DimensionMismatch, "input of length " + std::to_string(x.size()) + ", network expects " +
                                             std::to_string(net.input_dim()));
  std::vector<double> h(net.hidden_dim()), y(net.output_dim());
  detail::hidden_layer(net, x, h);
  detail::output_layer(net, h, y);
  return y;
}

struct LossAndGradient {
  double loss = 0.0;
  MlpParams grad;
};

/// Mean squared error over the selected rows and all outputs, plus l2 * (|W1|^2 + |W2|^2) / 2.
inline LossAndGradient loss_and_gradient(const MlpParams& net, const TrainingSet& data,
                                         std::span<const std::size_t> rows, double l2) {
  if (rows.empty()) throw Error(Errc::EmptyBatch, "loss over an empty batch");
  if (data.inputs.cols() != net.input_dim() || data.targets.cols() != net.output_dim() ||
      data.inputs.rows() != data.targets.rows())
    throw Error(Errc::DimensionMismatch, "training set shape does not match the network");

  const std::size_t m = net.input_dim(), h = net.hidden_dim(), o = net.output_dim();
  LossAndGradient out{0.0, MlpParams::zeros(m, h, o)};
  MlpParams& g = out.grad;
  std::vector<double> hid(h), y(o), dz2(o), dz1(h);
  const double scale = 1.0 / (static_cast<double>(rows.size()) * static_cast<double>(o));

  for (std::size_t r : rows) {
    auto x = data.inputs.row(r);
    auto t = data.targets.row(r);
    detail::hidden_layer(net, x, hid);
    detail::output_layer(net, hid, y);
    for (std::size_t k = 0; k < o; ++k) {
      const double err = y[k] - t[k];
      out.loss += err * err;
      dz2[k] = 2.0 * err * scale * (1.0 - y[k] * y[k]);
      g.b2[k] += dz2[k];
      auto gw2 = g.w2.row(k);
      for (std::size_t j = 0; j < h; ++j) gw2[j] += dz2[k] * hid[j];
    }
    for (std::size_t j = 0; j < h; ++j) {
      double back = 0.0;
      for (std::size_t k = 0; k < o; ++k) back += net.w2(k, j) * dz2[k];
      dz1[j] = back * (1.0 - hid[j] * hid[j]);
      g.b1[j] += dz1[j];
      auto gw1 = g.w1.row(j);
      for (std::size_t i = 0; i < m; ++i) gw1[i] += dz1[j] * x[i];
    }
  }
  out.loss *= scale;

  if (l2 > 0.0) {
    double sq = 0.0;
    for (double w : net.w1.data()) sq += w * w;
    for (double w : net.w2.data()) sq += w * w;
    out.loss += 0.5 * l2 * sq;
    auto add_decay = [l2](std::span<double> gw, std::span<const double> w) {
      for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += l2 * w[i];
    };
    add_decay(g.w1.data(), net.w1.data());
    add_decay(g.w2.data(), net.w2.data());
  }
  return out;
}

inline LossAndGradient loss_and_gradient(const MlpParams& net, const TrainingSet& data, double l2) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_and_gradient(net, data, all, l2);
}

struct TrainResult {
  MlpParams net;
  std::vector<double> loss_history;  // [0] before training, then one entry per epoch
};

/// Plain (mini-)batch gradient descent; the sample order is reshuffled every
/// epoch from cfg.seed. Aborts with DivergedToNonFinite on the first NaN/Inf.
inline TrainResult train(MlpParams net, const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw Error(Errc::EmptyBatch, "training set is empty");
  for (double t : data.targets.data())
    if (!(t >= -1.0 && t <= 1.0)) throw Error(Errc::OutOfRange, "targets must lie in [-1, 1]");

  const std::size_t n = data.size();
  const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= n;
  const std::size_t batch = full_batch ? n : cfg.batch_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);

  TrainResult result;
  result.loss_history.reserve(cfg.epochs + 1);
  result.loss_history.push_back(loss_and_gradient(net, data, order, cfg.l2).loss);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (!full_batch) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      auto step = loss_and_gradient(net, data, std::span(order).subspan(start, len), cfg.l2);
      auto apply = [lr = cfg.learning_rate](std::span<double> w, std::span<const double> gw) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
      };
      apply(net.w1.data(), step.grad.w1.data());
      apply(net.b1, step.grad.b1);
      apply(net.w2.data(), step.grad.w2.data());
      apply(net.b2, step.grad.b2);
      if (!net.all_finite())
        throw Error(Errc::DivergedToNonFinite, "non-finite weight at epoch " + std::to_string(epoch + 1) +
                                                   ", batch starting at " + std::to_string(start) +
                                                   " (lr=" + std::to_string(cfg.learning_rate) + ")");
    }
    result.loss_history.push_back(loss_and_gradient(net, data, order, cfg.l2).loss);
  }
  result.net = std::move(net);
  return result;
}

}  // namespace pairnet
