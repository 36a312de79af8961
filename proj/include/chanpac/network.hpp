#ifndef CHANPAC_NETWORK_HPP
#define CHANPAC_NETWORK_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chanpac/channel.hpp"
#include "chanpac/rng.hpp"
#include "chanpac/tensor.hpp"

namespace chanpac {

enum class Activation { Relu, Tanh, Identity };

struct DenseLayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation act = Activation::Relu;
};

// The baseline L-layer dense network. split_index is the position l0 of the
// channel layer in the augmented L+1-layer network, 1 <= l0 <= L+1: the
// channel acts on the output of learnable layer l0-1 (the raw input when
// l0 == 1, the logits when l0 == L+1).
struct NetworkSpec {
  std::vector<DenseLayerSpec> layers;
  std::size_t split_index = 1;
  std::size_t classes = 0;

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("network: no layers");
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
      if (layers[i].out_dim != layers[i + 1].in_dim)
        throw std::invalid_argument("network: layer dims do not chain at layer " +
                                    std::to_string(i + 1));
    if (split_index < 1 || split_index > layers.size() + 1)
      throw std::invalid_argument("network: split_index out of range");
    if (classes != layers.back().out_dim)
      throw std::invalid_argument("network: classes != last layer out_dim");
  }

  // Feature dimension d seen by the channel layer.
  std::size_t split_dim() const {
    return split_index == 1 ? layers.front().in_dim
                            : layers[split_index - 2].out_dim;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.in_dim * l.out_dim + l.out_dim;
    return n;
  }

  // Offset of layer i's weight block; bias follows the weights.
  std::size_t layer_offset(std::size_t i) const {
    std::size_t off = 0;
    for (std::size_t j = 0; j < i; ++j)
      off += layers[j].in_dim * layers[j].out_dim + layers[j].out_dim;
    return off;
  }
};

// Flat layer-major parameters: per layer, the weight matrix (out x in,
// row-major) followed by the bias.
using ParamVector = std::vector<double>;
using Gradients = std::vector<double>;

struct LayerParams {
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;
};

inline std::vector<LayerParams> unflatten(const NetworkSpec& spec,
                                          std::span<const double> params) {
  if (params.size() != spec.param_count())
    throw std::invalid_argument("unflatten: param length mismatch");
  std::vector<LayerParams> out;
  std::size_t off = 0;
  for (const auto& l : spec.layers) {
    LayerParams lp;
    lp.weights.assign(params.begin() + off, params.begin() + off + l.in_dim * l.out_dim);
    off += l.in_dim * l.out_dim;
    lp.bias.assign(params.begin() + off, params.begin() + off + l.out_dim);
    off += l.out_dim;
    out.push_back(std::move(lp));
  }
  return out;
}

inline ParamVector flatten(const NetworkSpec& spec,
                           const std::vector<LayerParams>& layers) {
  if (layers.size() != spec.layers.size())
    throw std::invalid_argument("flatten: layer count mismatch");
  ParamVector out;
  out.reserve(spec.param_count());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weights.size() != spec.layers[i].in_dim * spec.layers[i].out_dim ||
        layers[i].bias.size() != spec.layers[i].out_dim)
      throw std::invalid_argument("flatten: block size mismatch at layer " +
                                  std::to_string(i + 1));
    out.insert(out.end(), layers[i].weights.begin(), layers[i].weights.end());
    out.insert(out.end(), layers[i].bias.begin(), layers[i].bias.end());
  }
  return out;
}

// Per-layer Gaussian weights with deviation sigma_p, zero biases.
inline ParamVector init_params(const NetworkSpec& spec, double sigma_p, Rng& rng) {
  spec.validate();
  ParamVector p(spec.param_count(), 0.0);
  std::size_t off = 0;
  for (const auto& l : spec.layers) {
    for (std::size_t i = 0; i < l.in_dim * l.out_dim; ++i)
      p[off + i] = sigma_p * rng.normal();
    off += l.in_dim * l.out_dim + l.out_dim;
  }
  return p;
}

struct ForwardCache {
  std::vector<Tensor> act;  // act[0] = input, act[i] = layer i output
  std::vector<Tensor> pre;  // pre[i-1] = layer i pre-activation
  Tensor channel_in, channel_out;
  Tensor offset_out;
  bool channel_applied = false;
  bool offset_applied = false;
};

namespace detail {

inline void dense_forward(const DenseLayerSpec& l, std::span<const double> params,
                          std::size_t off, const Tensor& in, Tensor& z) {
  z = Tensor::zeros({l.out_dim});
  const double* w = params.data() + off;
  const double* b = params.data() + off + l.in_dim * l.out_dim;
  for (std::size_t r = 0; r < l.out_dim; ++r) {
    double acc = b[r];
    const double* wr = w + r * l.in_dim;
    for (std::size_t c = 0; c < l.in_dim; ++c) acc += wr[c] * in.data[c];
    z.data[r] = acc;
  }
}

inline double activate(Activation a, double z) {
  if (a == Activation::Relu) return z > 0.0 ? z : 0.0;
  if (a == Activation::Tanh) return std::tanh(z);
  return z;
}

inline double activate_deriv(Activation a, double z) {
  if (a == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
  if (a == Activation::Tanh) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  }
  return 1.0;
}

}  // namespace detail

// Single-sample forward pass with optional channel injection at the split.
// split_offset, when given, is added to the feature right after the channel
// position; it is a probe for sensitivity analysis, not part of the model.
inline Tensor forward(const NetworkSpec& spec, std::span<const double> params,
                      const Tensor& input, const ChannelSample* channel = nullptr,
                      ForwardCache* cache = nullptr,
                      const std::vector<double>* split_offset = nullptr) {
  if (params.size() != spec.param_count())
    throw std::invalid_argument("forward: param length mismatch");
  if (input.size() != spec.layers.front().in_dim)
    throw std::invalid_argument("forward: input dim mismatch");
  if (split_offset && split_offset->size() != spec.split_dim())
    throw std::invalid_argument("forward: split offset dim mismatch");
  if (cache) {
    cache->act.clear();
    cache->pre.clear();
    cache->channel_applied = false;
    cache->offset_applied = false;
  }

  Tensor cur = input;
  if (cache) cache->act.push_back(cur);

  auto maybe_channel = [&](std::size_t pos) {
    if (pos != spec.split_index) return;
    if (channel && channel->kind != ChannelKind::Identity) {
      Tensor out = apply_channel(*channel, cur);
      if (cache) {
        cache->channel_in = cur;
        cache->channel_out = out;
        cache->channel_applied = true;
      }
      cur = std::move(out);
    }
    if (split_offset) {
      for (std::size_t i = 0; i < cur.size(); ++i)
        cur.data[i] += (*split_offset)[i];
      if (cache) {
        cache->offset_out = cur;
        cache->offset_applied = true;
      }
    }
  };

  std::size_t off = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    maybe_channel(i + 1);
    const auto& l = spec.layers[i];
    Tensor z;
    detail::dense_forward(l, params, off, cur, z);
    off += l.in_dim * l.out_dim + l.out_dim;
    Tensor a = Tensor::zeros({l.out_dim});
    for (std::size_t r = 0; r < l.out_dim; ++r)
      a.data[r] = detail::activate(l.act, z.data[r]);
    if (!a.all_finite())
      throw std::runtime_error("forward: non-finite activation at layer " +
                               std::to_string(i + 1));
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->act.push_back(a);
    }
    cur = std::move(a);
  }
  maybe_channel(spec.layers.size() + 1);
  return cur;
}

// Cross-entropy with fused softmax (log-sum-exp with max subtraction).
inline double loss_ce(const Tensor& logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw std::invalid_argument("loss_ce: label out of range");
  const double mx = *std::max_element(logits.data.begin(), logits.data.end());
  double lse = 0.0;
  for (double v : logits.data) lse += std::exp(v - mx);
  return std::log(lse) + mx - logits.data[static_cast<std::size_t>(label)];
}

// 0-1 loss; argmax ties break toward the smallest index.
inline double loss_01(const Tensor& logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw std::invalid_argument("loss_01: label out of range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits.data[i] > logits.data[best]) best = i;
  return best == static_cast<std::size_t>(label) ? 0.0 : 1.0;
}

inline void softmax_into(const Tensor& logits, std::vector<double>& p) {
  const double mx = *std::max_element(logits.data.begin(), logits.data.end());
  p.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits.data[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
}

// Gradient of the channel map w.r.t. its input feature.
inline std::vector<double> channel_backward(const ChannelSample& s,
                                            const Tensor& channel_in,
                                            const std::vector<double>& g) {
  switch (s.kind) {
    case ChannelKind::Identity:
      return g;
    case ChannelKind::Bec: {
      std::vector<double> out(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * s.mask[i];
      return out;
    }
    case ChannelKind::RayleighZf: {
      // out = f + rms(f) b, d rms/d f_j = f_j / (d * rms)
      const std::size_t d = channel_in.size();
      double ss = 0.0;
      for (double v : channel_in.data) ss += v * v;
      const double rms = std::sqrt(ss / static_cast<double>(d));
      std::vector<double> out = g;
      if (rms > 0.0) {
        double gb = 0.0;
        for (std::size_t i = 0; i < d; ++i) gb += g[i] * s.bias[i];
        const double c = gb / (static_cast<double>(d) * rms);
        for (std::size_t i = 0; i < d; ++i) out[i] += c * channel_in.data[i];
      }
      return out;
    }
  }
  throw std::logic_error("channel_backward: bad kind");
}

struct BackwardResult {
  double mean_loss = 0.0;
  Gradients grads;                      // exact d(mean CE)/d(params)
  std::vector<double> split_feature_grad;  // mean d(CE)/d(channel-layer input)
};

// Exact backprop of mean cross-entropy over a batch. A channel sample, if
// present, is treated as a constant affine map at the split.
inline BackwardResult backward(const NetworkSpec& spec, std::span<const double> params,
                               std::span<const double> features,
                               std::span<const int> labels,
                               const ChannelSample* channel = nullptr,
                               const std::vector<double>* split_offset = nullptr) {
  spec.validate();
  const std::size_t in_dim = spec.layers.front().in_dim;
  if (labels.empty()) throw std::invalid_argument("backward: empty batch");
  if (features.size() != labels.size() * in_dim)
    throw std::invalid_argument("backward: feature block size mismatch");

  BackwardResult res;
  res.grads.assign(spec.param_count(), 0.0);
  res.split_feature_grad.assign(spec.split_dim(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  const std::size_t num_layers = spec.layers.size();

  ForwardCache cache;
  std::vector<double> p;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    Tensor input({in_dim}, std::vector<double>(features.begin() + s * in_dim,
                                               features.begin() + (s + 1) * in_dim));
    Tensor logits = forward(spec, params, input, channel, &cache, split_offset);
    res.mean_loss += loss_ce(logits, labels[s]) * inv_n;

    softmax_into(logits, p);
    std::vector<double> grad_out = p;
    grad_out[static_cast<std::size_t>(labels[s])] -= 1.0;
    for (double& g : grad_out) g *= inv_n;

    // Channel after the last layer: step back through it first.
    if (spec.split_index == num_layers + 1) {
      if (cache.channel_applied)
        grad_out = channel_backward(*channel, cache.channel_in, grad_out);
      for (std::size_t c = 0; c < grad_out.size(); ++c)
        res.split_feature_grad[c] += grad_out[c];
    }

    for (std::size_t i = num_layers; i >= 1; --i) {
      const auto& l = spec.layers[i - 1];
      const std::size_t off = spec.layer_offset(i - 1);
      const Tensor& z = cache.pre[i - 1];
      // Input actually fed to layer i (channel/offset output if the split is
      // here). The additive offset is transparent to the backward pass.
      const bool at_split = spec.split_index == i;
      const Tensor& in =
          at_split && cache.offset_applied
              ? cache.offset_out
              : (at_split && cache.channel_applied ? cache.channel_out
                                                   : cache.act[i - 1]);
      std::vector<double> dz(l.out_dim);
      for (std::size_t r = 0; r < l.out_dim; ++r)
        dz[r] = grad_out[r] * detail::activate_deriv(l.act, z.data[r]);

      double* gw = res.grads.data() + off;
      double* gb = res.grads.data() + off + l.in_dim * l.out_dim;
      const double* w = params.data() + off;
      std::vector<double> din(l.in_dim, 0.0);
      for (std::size_t r = 0; r < l.out_dim; ++r) {
        gb[r] += dz[r];
        double* gwr = gw + r * l.in_dim;
        const double* wr = w + r * l.in_dim;
        for (std::size_t c = 0; c < l.in_dim; ++c) {
          gwr[c] += dz[r] * in.data[c];
          din[c] += wr[c] * dz[r];
        }
      }
      if (spec.split_index == i) {
        if (cache.channel_applied)
          din = channel_backward(*channel, cache.channel_in, din);
        for (std::size_t c = 0; c < din.size(); ++c)
          res.split_feature_grad[c] += din[c];
      }
      grad_out = std::move(din);
    }
  }
  return res;
}

inline double grad_norm(std::span<const double> g) {
  double ss = 0.0;
  for (double v : g) ss += v * v;
  return std::sqrt(ss);
}

}  // namespace chanpac

#endif
