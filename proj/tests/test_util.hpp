#ifndef CHANPAC_TEST_UTIL_HPP
#define CHANPAC_TEST_UTIL_HPP

#include <cstdint>
#include <vector>

#include "chanpac/network.hpp"
#include "chanpac/rng.hpp"

namespace chanpac::testutil {

// Small random net + batch used by gradient checks.
struct NetAndBatch {
  NetworkSpec spec;
  ParamVector params;
  std::vector<double> feats;
  std::vector<int> labels;
};

inline NetAndBatch seeded_case(std::uint64_t seed, std::size_t in = 5,
                               std::size_t hidden = 8, std::size_t mid = 6,
                               std::size_t classes = 4, std::size_t batch = 7,
                               std::size_t split_index = 3) {
  NetAndBatch c;
  c.spec.layers = {{in, hidden, Activation::Relu},
                   {hidden, mid, Activation::Relu},
                   {mid, classes, Activation::Identity}};
  c.spec.split_index = split_index;
  c.spec.classes = classes;
  Rng rng(seed, "testcase");
  c.params = init_params(c.spec, 0.5, rng);
  c.feats.resize(batch * in);
  for (double& v : c.feats) v = rng.normal();
  c.labels.resize(batch);
  for (int& l : c.labels)
    l = static_cast<int>(rng.uniform() * static_cast<double>(classes));
  return c;
}

// Central finite difference of mean CE w.r.t. every parameter; returns the
// max relative error against the analytic gradient.
inline double max_grad_rel_error(const NetworkSpec& spec, ParamVector params,
                                 const std::vector<double>& feats,
                                 const std::vector<int>& labels,
                                 const ChannelSample* ch = nullptr) {
  const auto analytic = backward(spec, params, feats, labels, ch);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(params[i]));
    const double save = params[i];
    params[i] = save + h;
    const double lp = backward(spec, params, feats, labels, ch).mean_loss;
    params[i] = save - h;
    const double lm = backward(spec, params, feats, labels, ch).mean_loss;
    params[i] = save;
    const double fd = (lp - lm) / (2.0 * h);
    const double denom = std::max(std::abs(fd), std::abs(analytic.grads[i]));
    if (denom < 1e-10) continue;  // both effectively zero
    worst = std::max(worst, std::abs(fd - analytic.grads[i]) / denom);
  }
  return worst;
}

}  // namespace chanpac::testutil

#endif
