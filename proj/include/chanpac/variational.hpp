#ifndef CHANPAC_VARIATIONAL_HPP
#define CHANPAC_VARIATIONAL_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chanpac/bound.hpp"
#include "chanpac/channel.hpp"
#include "chanpac/data.hpp"
#include "chanpac/network.hpp"
#include "chanpac/rng.hpp"

namespace chanpac {

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double softplus_inv(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }
inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Diagonal-Gaussian posterior over the flat learnable parameters,
// sigma = softplus(rho) elementwise.
struct VariationalPosterior {
  std::vector<double> mu;
  std::vector<double> rho;

  std::vector<double> sigma() const {
    std::vector<double> s(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) s[i] = softplus(rho[i]);
    return s;
  }
};

// One reparameterized weight draw w = mu + sigma * eps.
inline ParamVector sample_weights(const VariationalPosterior& post, Rng& rng) {
  ParamVector w(post.mu.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = post.mu[i] + softplus(post.rho[i]) * rng.normal();
  return w;
}

enum class TrainMode { Erm, ChannelAware };
enum class KhatGradMode { DoubleBackpropFd, StopGradient };
enum class KhatScope { AllWeights, SplitFeature };

struct TrainConfig {
  TrainMode mode = TrainMode::ChannelAware;
  double eta1 = 1.0;
  double k = 1.0;
  double lr = 0.05;
  int epochs = 10;
  std::size_t batch_size = 64;
  double sigma_p = 0.1;
  std::uint64_t seed = 1;
  KhatGradMode khat_grad = KhatGradMode::DoubleBackpropFd;
  KhatScope khat_scope = KhatScope::AllWeights;
  int khat_refresh = 10;        // steps between recomputing the gradient norm
  bool khat_full_dataset = false;
  double clip_norm = 0.0;       // joint (mu, rho) gradient clip; 0 disables
  std::vector<double> mu_init;  // optional warm start for the posterior mean

  void validate() const {
    if (!(eta1 > 0.0)) throw std::invalid_argument("train: eta1 must be > 0");
    if (!(k > 0.0)) throw std::invalid_argument("train: k must be > 0");
    if (lr < 0.0) throw std::invalid_argument("train: lr must be >= 0");
    if (epochs < 0 || batch_size < 1)
      throw std::invalid_argument("train: bad epochs or batch_size");
    if (!(sigma_p > 0.0)) throw std::invalid_argument("train: sigma_p must be > 0");
    if (khat_refresh < 1) throw std::invalid_argument("train: khat_refresh >= 1");
    if (clip_norm < 0.0) throw std::invalid_argument("train: clip_norm must be >= 0");
  }
};

struct TrainStats {
  std::vector<double> objective;       // mean J per epoch
  std::vector<double> empirical_risk;  // mean CE per epoch
  std::vector<double> kl;              // KL at epoch end
  std::vector<double> khat;            // gradient-norm surrogate at epoch end
  std::vector<double> omega;           // channel penalty (constant per run)
  std::vector<double> wall_seconds;
};

// Closed-form (or surrogate) channel penalty used inside the objective.
// Rayleigh with d > 2 uses the Laplace-prior penalty d pi / (4 sqrt(gamma)),
// which is the d/2-fold subchannel analogue of the scalar form.
inline double closed_form_omega(const ChannelSpec& ch, std::size_t d) {
  switch (ch.kind) {
    case ChannelKind::Identity:
      return 0.0;
    case ChannelKind::Bec:
      return omega_bec(static_cast<int>(d), ch.p_o);
    case ChannelKind::RayleighZf:
      if (d == 2) return omega_rayleigh_scalar(ch.gamma);
      return static_cast<double>(d) * std::numbers::pi / (4.0 * std::sqrt(ch.gamma));
  }
  throw std::invalid_argument("objective: channel without a closed-form penalty");
}

// Gradient-norm surrogate for the Lipschitz constant, evaluated at params.
inline double khat_value(const NetworkSpec& spec, std::span<const double> params,
                         std::span<const double> feats, std::span<const int> labels,
                         KhatScope scope) {
  const auto b = backward(spec, params, feats, labels, nullptr);
  return scope == KhatScope::AllWeights ? grad_norm(b.grads)
                                        : grad_norm(b.split_feature_grad);
}

// Cached surrogate value plus (in double-backprop mode) the finite-difference
// gradient of the K_hat * Omega term w.r.t. mu, both taken at the posterior
// mean. At the mean eps = 0, so the term has no rho gradient.
struct KhatCache {
  double value = 0.0;
  std::vector<double> penalty_grad_mu;
  bool has_grad = false;
};

inline KhatCache compute_khat_cache(const NetworkSpec& spec,
                                    const VariationalPosterior& post,
                                    std::span<const double> feats,
                                    std::span<const int> labels,
                                    const TrainConfig& cfg, double omega,
                                    double fd_h_scale = 1e-4) {
  KhatCache cache;
  const auto b = backward(spec, post.mu, feats, labels, nullptr);
  const std::size_t p = post.mu.size();
  const double h = fd_h_scale * (1.0 + grad_norm(post.mu));

  if (cfg.khat_scope == KhatScope::SplitFeature) {
    cache.value = grad_norm(b.split_feature_grad);
    if (cfg.khat_grad != KhatGradMode::DoubleBackpropFd || cache.value <= 0.0 ||
        omega == 0.0)
      return cache;
    // grad_w ||g_f(w)|| = (d g_f / d w)^T v with v = g_f / ||g_f||. Since
    // v . g_f(w) is the directional derivative of the loss along a split
    // offset, differentiate that by central differences of weight gradients
    // taken at offsets +-h v.
    std::vector<double> ofs_p(b.split_feature_grad.size());
    std::vector<double> ofs_m(ofs_p.size());
    for (std::size_t i = 0; i < ofs_p.size(); ++i) {
      const double step = h * b.split_feature_grad[i] / cache.value;
      ofs_p[i] = step;
      ofs_m[i] = -step;
    }
    const auto bp = backward(spec, post.mu, feats, labels, nullptr, &ofs_p);
    const auto bm = backward(spec, post.mu, feats, labels, nullptr, &ofs_m);
    cache.penalty_grad_mu.resize(p);
    for (std::size_t i = 0; i < p; ++i)
      cache.penalty_grad_mu[i] = omega * (bp.grads[i] - bm.grads[i]) / (2.0 * h);
    cache.has_grad = true;
    return cache;
  }

  cache.value = grad_norm(b.grads);
  if (cfg.khat_grad != KhatGradMode::DoubleBackpropFd || cache.value <= 0.0 ||
      omega == 0.0)
    return cache;

  // grad ||g(w)|| = H v with v = g / ||g||, central finite difference.
  ParamVector wp(p), wm(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double step = h * b.grads[i] / cache.value;
    wp[i] = post.mu[i] + step;
    wm[i] = post.mu[i] - step;
  }
  const auto bp = backward(spec, wp, feats, labels, nullptr);
  const auto bm = backward(spec, wm, feats, labels, nullptr);
  cache.penalty_grad_mu.resize(p);
  for (std::size_t i = 0; i < p; ++i)
    cache.penalty_grad_mu[i] = omega * (bp.grads[i] - bm.grads[i]) / (2.0 * h);
  cache.has_grad = true;
  return cache;
}

struct ObjectiveResult {
  double j = 0.0;
  double ce = 0.0;       // one-sample empirical risk
  double kl = 0.0;       // KL(posterior || prior)
  double khat = 0.0;
  double omega = 0.0;
  double penalty = 0.0;  // khat * omega
  std::vector<double> grad_mu, grad_rho;  // filled when requested
};

// Surrogate objective J = CE + (eta1/k) KL + K_hat * Omega at a fixed noise
// draw eps, with optional exact pathwise gradients. Training is channel-free;
// the channel enters only through the constant penalty.
inline ObjectiveResult objective_at(const NetworkSpec& spec,
                                    const VariationalPosterior& post,
                                    std::span<const double> feats,
                                    std::span<const int> labels,
                                    const ChannelSpec& channel,
                                    const TrainConfig& cfg,
                                    std::span<const double> eps,
                                    const KhatCache& khat, bool want_grad) {
  const std::size_t p = post.mu.size();
  if (post.rho.size() != p || eps.size() != p)
    throw std::invalid_argument("objective: mu/rho/eps length mismatch");

  std::vector<double> sig(p);
  ParamVector w(p);
  for (std::size_t i = 0; i < p; ++i) {
    sig[i] = softplus(post.rho[i]);
    w[i] = post.mu[i] + sig[i] * eps[i];
  }
  const auto b = backward(spec, w, feats, labels, nullptr);

  ObjectiveResult r;
  r.ce = b.mean_loss;
  r.kl = kl_diag_gaussian(post.mu, sig, cfg.sigma_p);
  r.omega = closed_form_omega(channel, spec.split_dim());
  r.khat = khat.value;
  r.penalty = r.khat * r.omega;
  r.j = r.ce + (cfg.eta1 / cfg.k) * r.kl + r.penalty;

  if (want_grad) {
    const double c = cfg.eta1 / cfg.k;
    const double inv_sp2 = 1.0 / (cfg.sigma_p * cfg.sigma_p);
    r.grad_mu.resize(p);
    r.grad_rho.resize(p);
    for (std::size_t i = 0; i < p; ++i) {
      const double sg = sigmoid(post.rho[i]);
      r.grad_mu[i] = b.grads[i] + c * post.mu[i] * inv_sp2;
      if (khat.has_grad) r.grad_mu[i] += khat.penalty_grad_mu[i];
      r.grad_rho[i] =
          b.grads[i] * eps[i] * sg + c * (sig[i] * inv_sp2 - 1.0 / sig[i]) * sg;
    }
  }
  return r;
}

// One SGD step on (mu, rho). eps is drawn from rng; khat comes from the
// caller's refresh schedule.
inline ObjectiveResult train_step(VariationalPosterior& post,
                                  const NetworkSpec& spec,
                                  std::span<const double> feats,
                                  std::span<const int> labels,
                                  const ChannelSpec& channel,
                                  const TrainConfig& cfg, Rng& rng,
                                  const KhatCache& khat,
                                  std::size_t step_index = 0) {
  const std::size_t p = post.mu.size();
  std::vector<double> eps(p);
  for (double& e : eps) e = rng.normal();
  auto r = objective_at(spec, post, feats, labels, channel, cfg, eps, khat, true);
  if (cfg.clip_norm > 0.0) {
    double ss = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      ss += r.grad_mu[i] * r.grad_mu[i] + r.grad_rho[i] * r.grad_rho[i];
    const double norm = std::sqrt(ss);
    if (norm > cfg.clip_norm) {
      const double scale = cfg.clip_norm / norm;
      for (std::size_t i = 0; i < p; ++i) {
        r.grad_mu[i] *= scale;
        r.grad_rho[i] *= scale;
      }
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    post.mu[i] -= cfg.lr * r.grad_mu[i];
    // floor keeps softplus(rho) strictly positive in double precision
    post.rho[i] = std::max(post.rho[i] - cfg.lr * r.grad_rho[i], -30.0);
    if (!std::isfinite(post.mu[i]) || !std::isfinite(post.rho[i]))
      throw std::runtime_error("train: non-finite update at step " +
                               std::to_string(step_index));
  }
  return r;
}

struct TrainResult {
  TrainMode mode = TrainMode::Erm;
  ParamVector params;              // ERM weights
  VariationalPosterior posterior;  // channel-aware posterior
  TrainStats stats;
};

namespace detail {

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                            int epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, "shuffle", static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
  return idx;
}

// Gathers one mini-batch into contiguous buffers.
inline void gather_batch(const Dataset& ds, const std::vector<std::size_t>& order,
                         std::size_t begin, std::size_t end,
                         std::vector<double>& feats, std::vector<int>& labels) {
  const std::size_t m = end - begin;
  feats.resize(m * ds.dim);
  labels.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t src = order[begin + i];
    std::copy(ds.features.begin() + src * ds.dim,
              ds.features.begin() + (src + 1) * ds.dim,
              feats.begin() + i * ds.dim);
    labels[i] = ds.labels[src];
  }
}

}  // namespace detail

// Full training loop: plain SGD on cross-entropy for ERM, reparameterized
// SGD on the surrogate objective for the channel-aware mode.
inline TrainResult train(const NetworkSpec& spec, const Dataset& dataset,
                         const ChannelSpec& channel, const TrainConfig& cfg) {
  spec.validate();
  dataset.validate();
  cfg.validate();
  if (dataset.dim != spec.layers.front().in_dim)
    throw std::invalid_argument("train: dataset dim != network input dim");

  TrainResult res;
  res.mode = cfg.mode;
  Rng init_rng(cfg.seed, "init");
  Rng posterior_rng(cfg.seed, "posterior");

  const std::size_t n = dataset.n;
  std::vector<double> batch_feats;
  std::vector<int> batch_labels;

  if (cfg.mode == TrainMode::Erm) {
    res.params = init_params(spec, cfg.sigma_p, init_rng);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto order = detail::epoch_order(n, cfg.seed, epoch);
      double loss_acc = 0.0;
      std::size_t steps = 0;
      for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
        const std::size_t end = std::min(n, begin + cfg.batch_size);
        detail::gather_batch(dataset, order, begin, end, batch_feats, batch_labels);
        auto b = backward(spec, res.params, batch_feats, batch_labels, nullptr);
        for (std::size_t i = 0; i < res.params.size(); ++i) {
          res.params[i] -= cfg.lr * b.grads[i];
          if (!std::isfinite(res.params[i]))
            throw std::runtime_error("train: non-finite update at epoch " +
                                     std::to_string(epoch));
        }
        loss_acc += b.mean_loss;
        ++steps;
      }
      const auto full = backward(spec, res.params, dataset.features,
                                 dataset.labels, nullptr);
      const auto t1 = std::chrono::steady_clock::now();
      res.stats.objective.push_back(loss_acc / static_cast<double>(steps));
      res.stats.empirical_risk.push_back(loss_acc / static_cast<double>(steps));
      res.stats.kl.push_back(0.0);
      res.stats.khat.push_back(grad_norm(full.grads));
      res.stats.omega.push_back(0.0);
      res.stats.wall_seconds.push_back(
          std::chrono::duration<double>(t1 - t0).count());
    }
    return res;
  }

  // Channel-aware: posterior initialized at the prior scale, or warm-started
  // from caller-provided weights (e.g. an ERM solution).
  if (!cfg.mu_init.empty()) {
    if (cfg.mu_init.size() != spec.param_count())
      throw std::invalid_argument("train: mu_init length mismatch");
    res.posterior.mu = cfg.mu_init;
  } else {
    res.posterior.mu = init_params(spec, cfg.sigma_p, init_rng);
  }
  res.posterior.rho.assign(res.posterior.mu.size(), softplus_inv(cfg.sigma_p));
  const double omega = closed_form_omega(channel, spec.split_dim());

  KhatCache khat;
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = detail::epoch_order(n, cfg.seed, epoch);
    double j_acc = 0.0, ce_acc = 0.0, kl_last = 0.0;
    std::size_t steps_in_epoch = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      detail::gather_batch(dataset, order, begin, end, batch_feats, batch_labels);
      if (step % static_cast<std::size_t>(cfg.khat_refresh) == 0) {
        if (cfg.khat_full_dataset)
          khat = compute_khat_cache(spec, res.posterior, dataset.features,
                                    dataset.labels, cfg, omega);
        else
          khat = compute_khat_cache(spec, res.posterior, batch_feats,
                                    batch_labels, cfg, omega);
      }
      const auto r = train_step(res.posterior, spec, batch_feats, batch_labels,
                                channel, cfg, posterior_rng, khat, step);
      j_acc += r.j;
      ce_acc += r.ce;
      kl_last = r.kl;
      ++step;
      ++steps_in_epoch;
    }
    const auto t1 = std::chrono::steady_clock::now();
    res.stats.objective.push_back(j_acc / static_cast<double>(steps_in_epoch));
    res.stats.empirical_risk.push_back(ce_acc / static_cast<double>(steps_in_epoch));
    res.stats.kl.push_back(kl_last);
    res.stats.khat.push_back(khat.value);
    res.stats.omega.push_back(omega);
    res.stats.wall_seconds.push_back(
        std::chrono::duration<double>(t1 - t0).count());
  }
  return res;
}

}  // namespace chanpac

#endif
