#ifndef CHANPAC_BOUND_HPP
#define CHANPAC_BOUND_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include "chanpac/channel.hpp"

namespace chanpac {

// Inputs to the generalization bound: training-set size n, free parameter k,
// confidence epsilon, sub-Gaussian constant sigma, Lipschitz constant K (or
// the local gradient-norm surrogate), and the deployment channel.
struct BoundConfig {
  std::int64_t n = 1;
  double k = 1.0;
  double epsilon = 0.025;
  double sigma = 1.0;
  double lipschitz = 0.0;
  bool surrogate_lipschitz = false;  // K is the gradient-norm surrogate
  ChannelSpec channel;

  static BoundConfig defaults_for(std::int64_t n_samples) {
    BoundConfig c;
    c.n = n_samples;
    c.k = std::sqrt(static_cast<double>(n_samples));
    return c;
  }

  void validate() const {
    if (n < 1) throw std::invalid_argument("bound: n must be >= 1");
    if (!(k > 0.0)) throw std::invalid_argument("bound: k must be > 0");
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw std::invalid_argument("bound: epsilon must be in (0,1)");
    if (!(sigma > 0.0)) throw std::invalid_argument("bound: sigma must be > 0");
    if (lipschitz < 0.0) throw std::invalid_argument("bound: K must be >= 0");
    channel.validate();
  }
};

// Additive decomposition of the bound. total is always the fixed-order sum
// empirical + concentration + confidence + kl + penalty + extra_log.
struct BoundReport {
  double empirical_risk = 0.0;
  double concentration_term = 0.0;  // k sigma^2 / 2n
  double confidence_term = 0.0;     // -log(eps) / k
  double kl_term = 0.0;             // KL / k
  double penalty_term = 0.0;        // K * Omega (or the Example-2 analogue)
  double extra_log_term = 0.0;      // (d/2k) log(pi^2/8), Rayleigh d>2 only
  double total = 0.0;
  bool surrogate = false;

  double resum() const {
    return empirical_risk + concentration_term + confidence_term + kl_term +
           penalty_term + extra_log_term;
  }
};

// BEC channel penalty: E[sqrt(R)] with R ~ Binomial(d, p_o), evaluated with
// log-domain binomial coefficients so large d stays stable.
inline double omega_bec(int d, double p_o) {
  if (d < 1) throw std::invalid_argument("omega_bec: d must be >= 1");
  if (!(p_o >= 0.0 && p_o <= 1.0))
    throw std::invalid_argument("omega_bec: p_o must be in [0,1]");
  if (p_o == 0.0) return 0.0;
  if (p_o == 1.0) return std::sqrt(static_cast<double>(d));
  const double lp = std::log(p_o), lq = std::log1p(-p_o);
  const double lgd = std::lgamma(d + 1.0);
  double sum = 0.0;
  for (int r = 1; r <= d; ++r) {
    const double logterm = lgd - std::lgamma(r + 1.0) - std::lgamma(d - r + 1.0) +
                           r * lp + (d - r) * lq;
    sum += std::exp(logterm) * std::sqrt(static_cast<double>(r));
  }
  return sum;
}

// Scalar (d = 2) Rayleigh penalty, pi / (2 sqrt(gamma)).
inline double omega_rayleigh_scalar(double gamma) {
  if (!(gamma > 0.0))
    throw std::invalid_argument("omega_rayleigh_scalar: gamma must be > 0");
  return std::numbers::pi / (2.0 * std::sqrt(gamma));
}

struct RayleighFullTerms {
  double penalty = 0.0;   // d pi K / (4 sqrt(gamma))
  double log_term = 0.0;  // (d / 2k) log(pi^2 / 8)
};

// Terms of the Laplace-prior Rayleigh bound at the optimal lambda.
inline RayleighFullTerms rayleigh_full_terms(int d, double k, double K,
                                             double gamma) {
  if (d < 2 || d % 2 != 0)
    throw std::invalid_argument("rayleigh_full_terms: d must be even >= 2");
  if (!(k > 0.0) || !(gamma > 0.0) || K < 0.0)
    throw std::invalid_argument("rayleigh_full_terms: invalid k, K, or gamma");
  RayleighFullTerms t;
  t.penalty = d * std::numbers::pi * K / (4.0 * std::sqrt(gamma));
  t.log_term = (d / (2.0 * k)) *
               std::log(std::numbers::pi * std::numbers::pi / 8.0);
  return t;
}

// Optimal Laplace rate for the Example-2 prior.
inline double lambda_star(double k, double K, double gamma) {
  if (!(k > 0.0) || !(gamma > 0.0) || K < 0.0)
    throw std::invalid_argument("lambda_star: invalid k, K, or gamma");
  return k * K + 4.0 * std::sqrt(gamma) / std::numbers::pi;
}

// Per-subchannel objective L(lambda) = pi lambda / (2 sqrt(gamma))
// + log(2 gamma / (lambda - kK)^2) - 2, defined for lambda > kK.
inline double rayleigh_objective_of_lambda(double lambda, double k, double K,
                                           double gamma) {
  if (!(k > 0.0) || !(gamma > 0.0) || K < 0.0)
    throw std::invalid_argument("rayleigh_objective: invalid k, K, or gamma");
  if (!(lambda > k * K))
    throw std::domain_error("rayleigh_objective: requires lambda > kK");
  const double excess = lambda - k * K;
  return std::numbers::pi * lambda / (2.0 * std::sqrt(gamma)) +
         std::log(2.0 * gamma / (excess * excess)) - 2.0;
}

// KL(N(mu, diag(sigma^2)) || N(0, sigma_p^2 I)).
inline double kl_diag_gaussian(std::span<const double> mu,
                               std::span<const double> sigma, double sigma_p) {
  if (mu.size() != sigma.size())
    throw std::invalid_argument("kl_diag_gaussian: mu/sigma length mismatch");
  if (!(sigma_p > 0.0))
    throw std::invalid_argument("kl_diag_gaussian: sigma_p must be > 0");
  const double inv2 = 1.0 / (2.0 * sigma_p * sigma_p);
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0))
      throw std::invalid_argument("kl_diag_gaussian: sigma must be > 0");
    kl += std::log(sigma_p / sigma[i]) +
          (sigma[i] * sigma[i] + mu[i] * mu[i]) * inv2 - 0.5;
  }
  return kl;
}

// Assembles the full bound for the configured channel. d is the feature
// dimension at the split.
inline BoundReport compose_bound(const BoundConfig& cfg, double empirical_risk,
                                 double kl_value, int d) {
  cfg.validate();
  if (kl_value < 0.0) throw std::invalid_argument("compose_bound: KL must be >= 0");
  BoundReport r;
  r.surrogate = cfg.surrogate_lipschitz;
  r.empirical_risk = empirical_risk;
  r.concentration_term =
      cfg.k * cfg.sigma * cfg.sigma / (2.0 * static_cast<double>(cfg.n));
  r.confidence_term = -std::log(cfg.epsilon) / cfg.k;
  r.kl_term = kl_value / cfg.k;
  switch (cfg.channel.kind) {
    case ChannelKind::Identity:
      break;
    case ChannelKind::Bec:
      r.penalty_term = cfg.lipschitz * omega_bec(d, cfg.channel.p_o);
      break;
    case ChannelKind::RayleighZf:
      if (d == 2) {
        r.penalty_term = cfg.lipschitz * omega_rayleigh_scalar(cfg.channel.gamma);
      } else {
        const auto t = rayleigh_full_terms(d, cfg.k, cfg.lipschitz, cfg.channel.gamma);
        r.penalty_term = t.penalty;
        r.extra_log_term = t.log_term;
      }
      break;
  }
  r.total = r.resum();
  return r;
}

}  // namespace chanpac

#endif
