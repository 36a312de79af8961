#ifndef CHANPAC_CHANNEL_HPP
#define CHANPAC_CHANNEL_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "chanpac/rng.hpp"
#include "chanpac/tensor.hpp"

namespace chanpac {

enum class ChannelKind { Identity, Bec, RayleighZf };

// Distribution of the stochastic channel-layer weights (M', B').
struct ChannelSpec {
  ChannelKind kind = ChannelKind::Identity;
  std::size_t d = 0;     // feature dimension at the split
  double p_o = 0.0;      // BEC outage probability
  double gamma = 1.0;    // Rayleigh average SNR, linear

  void validate() const {
    switch (kind) {
      case ChannelKind::Identity:
        break;
      case ChannelKind::Bec:
        if (d < 1) throw std::invalid_argument("bec: d must be >= 1");
        if (!(p_o >= 0.0 && p_o <= 1.0))
          throw std::invalid_argument("bec: p_o must be in [0,1]");
        break;
      case ChannelKind::RayleighZf:
        if (d < 2 || d % 2 != 0)
          throw std::invalid_argument("rayleigh: d must be even and >= 2");
        if (!(gamma > 0.0))
          throw std::invalid_argument("rayleigh: gamma must be > 0");
        break;
    }
  }
};

// One realization of the channel-layer weights. BEC carries the diagonal
// mask of M', Rayleigh carries the additive bias B' (M' = I).
struct ChannelSample {
  ChannelKind kind = ChannelKind::Identity;
  std::vector<double> mask;
  std::vector<double> bias;
};

inline ChannelSample sample_channel(const ChannelSpec& spec, Rng& rng) {
  spec.validate();
  ChannelSample s;
  s.kind = spec.kind;
  switch (spec.kind) {
    case ChannelKind::Identity:
      break;
    case ChannelKind::Bec: {
      s.mask.resize(spec.d);
      for (std::size_t i = 0; i < spec.d; ++i)
        s.mask[i] = rng.uniform() < 1.0 - spec.p_o ? 1.0 : 0.0;
      break;
    }
    case ChannelKind::RayleighZf: {
      // P = 1, sigma0^2 = 1/gamma. Per sub-channel: b = n / h as a complex
      // division realized on the 2-vector [Re, Im].
      const double noise_sd = std::sqrt(0.5 / spec.gamma);
      const double gain_sd = std::sqrt(0.5);
      s.bias.resize(spec.d);
      for (std::size_t i = 0; i < spec.d / 2; ++i) {
        double hr, hi, h2;
        do {
          hr = gain_sd * rng.normal();
          hi = gain_sd * rng.normal();
          h2 = hr * hr + hi * hi;
        } while (std::sqrt(h2) < 1e-12);  // measure-zero singular gain
        const double nr = noise_sd * rng.normal();
        const double ni = noise_sd * rng.normal();
        s.bias[2 * i] = (nr * hr + ni * hi) / h2;
        s.bias[2 * i + 1] = (ni * hr - nr * hi) / h2;
      }
      break;
    }
  }
  return s;
}

// Applies the channel-layer affine map to a length-d feature vector.
// Rayleigh transmits at unit average power: the feature is divided by its
// RMS value before the bias is added and rescaled afterwards, so the map
// reduces to f + rms(f) * b.
inline Tensor apply_channel(const ChannelSample& s, const Tensor& f) {
  switch (s.kind) {
    case ChannelKind::Identity:
      return f;
    case ChannelKind::Bec: {
      if (f.size() != s.mask.size())
        throw std::invalid_argument("apply_channel: feature/mask dim mismatch");
      Tensor out = f;
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= s.mask[i];
      return out;
    }
    case ChannelKind::RayleighZf: {
      if (f.size() != s.bias.size())
        throw std::invalid_argument("apply_channel: feature/bias dim mismatch");
      double ss = 0.0;
      for (double v : f.data) ss += v * v;
      const double rms = std::sqrt(ss / static_cast<double>(f.size()));
      Tensor out = f;
      for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] += rms * s.bias[i];
      return out;
    }
  }
  throw std::logic_error("apply_channel: bad kind");
}

enum class DistanceMetric { BecFrobenius, RayleighScalar, RayleighSubchannel };

// Weight-space distance between the realized channel weights and the
// noiseless (I, 0) pair.
inline double channel_distance(const ChannelSample& s, DistanceMetric m) {
  if (s.kind == ChannelKind::Identity) return 0.0;
  switch (m) {
    case DistanceMetric::BecFrobenius: {
      if (s.kind != ChannelKind::Bec)
        throw std::invalid_argument("distance: Frobenius metric needs a BEC sample");
      double zeros = 0.0;
      for (double v : s.mask) zeros += (v == 0.0) ? 1.0 : 0.0;
      return std::sqrt(zeros);
    }
    case DistanceMetric::RayleighScalar: {
      if (s.kind != ChannelKind::RayleighZf)
        throw std::invalid_argument("distance: scalar metric needs a Rayleigh sample");
      double ss = 0.0;
      for (double v : s.bias) ss += v * v;
      return std::sqrt(ss);  // operator-norm term is 0 since M' = I
    }
    case DistanceMetric::RayleighSubchannel: {
      if (s.kind != ChannelKind::RayleighZf)
        throw std::invalid_argument(
            "distance: subchannel metric needs a Rayleigh sample");
      double sum = 0.0;
      for (std::size_t i = 0; i + 1 < s.bias.size(); i += 2)
        sum += std::hypot(s.bias[i], s.bias[i + 1]);
      return sum;
    }
  }
  throw std::logic_error("channel_distance: bad metric");
}

// Default metric used for each channel's penalty term.
inline DistanceMetric penalty_metric(const ChannelSpec& spec) {
  switch (spec.kind) {
    case ChannelKind::Bec:
      return DistanceMetric::BecFrobenius;
    case ChannelKind::RayleighZf:
      return spec.d == 2 ? DistanceMetric::RayleighScalar
                         : DistanceMetric::RayleighSubchannel;
    case ChannelKind::Identity:
      return DistanceMetric::BecFrobenius;  // distance is 0 regardless
  }
  throw std::logic_error("penalty_metric: bad kind");
}

inline std::string to_string(ChannelKind k) {
  switch (k) {
    case ChannelKind::Identity: return "identity";
    case ChannelKind::Bec: return "bec";
    case ChannelKind::RayleighZf: return "rayleigh";
  }
  return "?";
}

}  // namespace chanpac

#endif
