#ifndef CHANPAC_ORACLE_HPP
#define CHANPAC_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "chanpac/channel.hpp"
#include "chanpac/rng.hpp"

namespace chanpac {

namespace detail {

// Recursive adaptive Simpson on [a, b].
template <class F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa,
                            double fm, double fb, double whole, double tol,
                            int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) throw std::runtime_error("quadrature: did not converge");
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60);
}

}  // namespace detail

// Quadrature of E[|T|] where T = N/H is the complex Gaussian ratio with
// density f(t) = alpha^2 / (pi (alpha^2 + |t|^2)^2), alpha^2 = 1/gamma.
// Equals pi / (2 sqrt(gamma)).
inline double quad_omega_rayleigh(double gamma, double rel_tol = 1e-8) {
  if (!(gamma > 0.0))
    throw std::invalid_argument("quad_omega_rayleigh: gamma must be > 0");
  const double a2 = 1.0 / gamma;
  const double alpha = std::sqrt(a2);
  // Radial form of E[|T|]: integral over [0, alpha], then the tail through
  // the substitution r = alpha / u, which reduces to 2 alpha / (1 + u^2)^2.
  auto head = [a2](double r) {
    const double q = a2 + r * r;
    return 2.0 * a2 * r * r / (q * q);
  };
  auto tail = [alpha](double u) {
    const double q = 1.0 + u * u;
    return 2.0 * alpha / (q * q);
  };
  return detail::adaptive_simpson(head, 0.0, alpha, rel_tol * alpha) +
         detail::adaptive_simpson(tail, 0.0, 1.0, rel_tol);
}

// Quadrature of the differential entropy of T. Equals log(pi e^2 / gamma).
inline double quad_entropy_T(double gamma, double rel_tol = 1e-8) {
  if (!(gamma > 0.0))
    throw std::invalid_argument("quad_entropy_T: gamma must be > 0");
  const double a2 = 1.0 / gamma;
  const double alpha = std::sqrt(a2);
  auto head = [a2](double r) {
    const double q = a2 + r * r;
    const double logf = std::log(a2 / std::numbers::pi) - 2.0 * std::log(q);
    return -2.0 * a2 * r * logf / (q * q);
  };
  // Tail under r = alpha / u: -2 u log f / (1 + u^2)^2 with
  // log f = -log(pi a2) - 2 log(1 + u^2) + 4 log u; the u = 0 limit is 0.
  auto tail = [a2](double u) {
    if (u <= 0.0) return 0.0;
    const double q = 1.0 + u * u;
    const double logf = -std::log(std::numbers::pi * a2) - 2.0 * std::log(q) +
                        4.0 * std::log(u);
    return -2.0 * u * logf / (q * q);
  };
  return detail::adaptive_simpson(head, 0.0, alpha, rel_tol * alpha) +
         detail::adaptive_simpson(tail, 0.0, 1.0, rel_tol);
}

struct McResult {
  double estimate = 0.0;
  double stderr_est = 0.0;
  std::int64_t samples = 0;
};

// Monte-Carlo estimate of the channel penalty Omega. Rayleigh distances are
// heavy-tailed (the plain mean has infinite variance), so those use a
// median-of-means over 32 blocks; the stderr is block-based in both cases.
inline McResult mc_omega(const ChannelSpec& spec, DistanceMetric metric,
                         std::int64_t samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("mc_omega: samples must be >= 1");
  spec.validate();
  McResult res;
  res.samples = samples;
  if (spec.kind == ChannelKind::Identity) return res;

  const int blocks = spec.kind == ChannelKind::RayleighZf
                         ? static_cast<int>(std::min<std::int64_t>(32, samples))
                         : static_cast<int>(std::min<std::int64_t>(32, samples));
  std::vector<double> block_mean(blocks, 0.0);
  std::int64_t done = 0;
  for (int b = 0; b < blocks; ++b) {
    const std::int64_t count = samples * (b + 1) / blocks - done;
    Rng stream = rng.derived(static_cast<std::uint64_t>(b));
    double acc = 0.0;
    for (std::int64_t i = 0; i < count; ++i)
      acc += channel_distance(sample_channel(spec, stream), metric);
    block_mean[b] = count > 0 ? acc / static_cast<double>(count) : 0.0;
    done += count;
  }

  double mean = 0.0;
  for (double v : block_mean) mean += v;
  mean /= blocks;
  double var = 0.0;
  for (double v : block_mean) var += (v - mean) * (v - mean);
  var = blocks > 1 ? var / (blocks - 1) : 0.0;
  res.stderr_est = std::sqrt(var / blocks);

  if (spec.kind == ChannelKind::RayleighZf) {
    std::vector<double> sorted = block_mean;
    std::sort(sorted.begin(), sorted.end());
    const int mid = blocks / 2;
    res.estimate = blocks % 2 == 1 ? sorted[mid]
                                   : 0.5 * (sorted[mid - 1] + sorted[mid]);
  } else {
    res.estimate = mean;
  }
  return res;
}

}  // namespace chanpac

#endif
