#ifndef CHANPAC_EDGESIM_HPP
#define CHANPAC_EDGESIM_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "chanpac/channel.hpp"
#include "chanpac/data.hpp"
#include "chanpac/network.hpp"
#include "chanpac/variational.hpp"

namespace chanpac {

struct RiskEstimate {
  double mean_01_loss = 0.0;
  double stderr_est = 0.0;
  std::size_t n_data = 0;
  int n_channel_draws = 0;
  int n_weight_draws = 0;
};

struct GapEstimate {
  RiskEstimate population_risk;
  double empirical_risk = 0.0;
  double delta = 0.0;  // population mean - empirical, exact
};

// Deterministic weights or a posterior; exactly one is set.
struct ModelRef {
  const ParamVector* params = nullptr;
  const VariationalPosterior* posterior = nullptr;

  static ModelRef of(const ParamVector& p) { return {&p, nullptr}; }
  static ModelRef of(const VariationalPosterior& q) { return {nullptr, &q}; }
};

namespace detail {

// Feature at the split (input to the channel layer).
inline Tensor forward_front(const NetworkSpec& spec, std::span<const double> params,
                            const Tensor& input) {
  Tensor cur = input;
  std::size_t off = 0;
  for (std::size_t i = 0; i + 1 < spec.split_index; ++i) {
    const auto& l = spec.layers[i];
    Tensor z;
    dense_forward(l, params, off, cur, z);
    off += l.in_dim * l.out_dim + l.out_dim;
    for (std::size_t r = 0; r < l.out_dim; ++r)
      z.data[r] = activate(l.act, z.data[r]);
    cur = std::move(z);
  }
  return cur;
}

// Remaining layers, fed with the channel output.
inline Tensor forward_back(const NetworkSpec& spec, std::span<const double> params,
                           Tensor cur) {
  std::size_t off = spec.layer_offset(spec.split_index - 1);
  for (std::size_t i = spec.split_index - 1; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    Tensor z;
    dense_forward(l, params, off, cur, z);
    off += l.in_dim * l.out_dim + l.out_dim;
    for (std::size_t r = 0; r < l.out_dim; ++r)
      z.data[r] = activate(l.act, z.data[r]);
    cur = std::move(z);
  }
  return cur;
}

}  // namespace detail

// Expected population risk over data x channel draws x weight draws, with a
// fresh channel sample per (input, draw). The stderr comes from the spread
// of per-draw dataset means.
inline RiskEstimate estimate_population_risk(const ModelRef& model,
                                             const NetworkSpec& spec,
                                             const Dataset& test_set,
                                             const ChannelSpec& channel,
                                             int n_channel_draws,
                                             int n_weight_draws, Rng rng) {
  spec.validate();
  test_set.validate();
  channel.validate();
  if (n_channel_draws < 1 || n_weight_draws < 1)
    throw std::invalid_argument("estimate_population_risk: draws must be >= 1");
  if ((model.params == nullptr) == (model.posterior == nullptr))
    throw std::invalid_argument("estimate_population_risk: exactly one model");
  if (model.params) n_weight_draws = 1;
  if (channel.kind == ChannelKind::Identity) n_channel_draws = 1;

  Rng weight_rng = rng.derived(0);
  const std::size_t n = test_set.n;
  const std::size_t replicates =
      static_cast<std::size_t>(n_channel_draws) * n_weight_draws;
  std::vector<double> replicate_sum(replicates, 0.0);

  ParamVector w;
  for (int wd = 0; wd < n_weight_draws; ++wd) {
    if (model.posterior)
      w = sample_weights(*model.posterior, weight_rng);
    else
      w = *model.params;
    for (std::size_t i = 0; i < n; ++i) {
      Tensor input({test_set.dim},
                   std::vector<double>(test_set.features.begin() + i * test_set.dim,
                                       test_set.features.begin() + (i + 1) * test_set.dim));
      const Tensor feature = detail::forward_front(spec, w, input);
      // One stream per (input, weight draw) keeps results independent of
      // evaluation order and parallelization.
      Rng ch_rng = rng.derived(1 + i).derived(static_cast<std::uint64_t>(wd));
      for (int cd = 0; cd < n_channel_draws; ++cd) {
        const ChannelSample s = sample_channel(channel, ch_rng);
        const Tensor logits =
            detail::forward_back(spec, w, apply_channel(s, feature));
        replicate_sum[static_cast<std::size_t>(wd) * n_channel_draws + cd] +=
            loss_01(logits, test_set.labels[i]);
      }
    }
  }

  RiskEstimate est;
  est.n_data = n;
  est.n_channel_draws = n_channel_draws;
  est.n_weight_draws = n_weight_draws;
  double mean = 0.0;
  for (double& v : replicate_sum) {
    v /= static_cast<double>(n);
    mean += v;
  }
  mean /= static_cast<double>(replicates);
  est.mean_01_loss = mean;
  if (replicates > 1) {
    double var = 0.0;
    for (double v : replicate_sum) var += (v - mean) * (v - mean);
    var /= static_cast<double>(replicates - 1);
    est.stderr_est = std::sqrt(var / static_cast<double>(replicates));
  }
  return est;
}

// Channel-free 0-1 risk of the model on a dataset; posteriors average over
// n_weight_draws fresh samples.
inline double empirical_01_risk(const ModelRef& model, const NetworkSpec& spec,
                                const Dataset& ds, int n_weight_draws, Rng rng) {
  if ((model.params == nullptr) == (model.posterior == nullptr))
    throw std::invalid_argument("empirical_01_risk: exactly one model");
  if (model.params) n_weight_draws = 1;
  Rng weight_rng = rng.derived(0);
  double acc = 0.0;
  ParamVector w;
  for (int wd = 0; wd < n_weight_draws; ++wd) {
    if (model.posterior)
      w = sample_weights(*model.posterior, weight_rng);
    else
      w = *model.params;
    for (std::size_t i = 0; i < ds.n; ++i) {
      Tensor input({ds.dim},
                   std::vector<double>(ds.features.begin() + i * ds.dim,
                                       ds.features.begin() + (i + 1) * ds.dim));
      acc += loss_01(forward(spec, w, input), ds.labels[i]);
    }
  }
  return acc / (static_cast<double>(ds.n) * n_weight_draws);
}

// Realized wireless generalization gap: population risk under the deployment
// channel minus the channel-free empirical risk on the training set.
inline GapEstimate estimate_gap(const ModelRef& model, const NetworkSpec& spec,
                                const Dataset& train_set, const Dataset& test_set,
                                const ChannelSpec& channel, int n_channel_draws,
                                int n_weight_draws, Rng rng) {
  GapEstimate gap;
  gap.population_risk =
      estimate_population_risk(model, spec, test_set, channel, n_channel_draws,
                               n_weight_draws, rng.derived(17));
  gap.empirical_risk =
      empirical_01_risk(model, spec, train_set, n_weight_draws, rng.derived(29));
  gap.delta = gap.population_risk.mean_01_loss - gap.empirical_risk;
  return gap;
}

}  // namespace chanpac

#endif
