#include "doctest.h"

#include <cmath>
#include <numbers>

#include "chanpac/channel.hpp"
#include "chanpac/oracle.hpp"

using namespace chanpac;

TEST_CASE("identity spec samples with no mask and no bias") {
  Rng rng(1, "channel");
  ChannelSpec spec;
  auto s = sample_channel(spec, rng);
  CHECK(s.kind == ChannelKind::Identity);
  CHECK(s.mask.empty());
  CHECK(s.bias.empty());
  Tensor f = Tensor::vec({1.0, -2.0, 3.0});
  Tensor out = apply_channel(s, f);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(out.data[i] == f.data[i]);
}

TEST_CASE("degenerate BEC outage probabilities") {
  Rng rng(2, "channel");
  ChannelSpec all{ChannelKind::Bec, 16, 0.0, 1.0};
  ChannelSpec none{ChannelKind::Bec, 16, 1.0, 1.0};
  for (int rep = 0; rep < 10; ++rep) {
    for (double v : sample_channel(all, rng).mask) CHECK(v == 1.0);
    for (double v : sample_channel(none, rng).mask) CHECK(v == 0.0);
  }
}

TEST_CASE("BEC mask mean matches 1 - p_o") {
  ChannelSpec spec{ChannelKind::Bec, 16, 0.3, 1.0};
  Rng rng(3, "channel");
  double acc = 0.0;
  const int reps = 100000;
  for (int i = 0; i < reps; ++i) {
    const auto s = sample_channel(spec, rng);
    for (double v : s.mask) acc += v;
  }
  acc /= reps * 16.0;
  CHECK(acc == doctest::Approx(0.7).epsilon(0.015));
}

TEST_CASE("apply: BEC masks elementwise, Rayleigh adds scaled bias") {
  ChannelSample mask{ChannelKind::Bec, {1.0, 0.0, 1.0}, {}};
  Tensor out = apply_channel(mask, Tensor::vec({2.0, 3.0, 4.0}));
  CHECK(out.data == std::vector<double>{2.0, 0.0, 4.0});

  ChannelSample zero{ChannelKind::RayleighZf, {}, {0.0, 0.0}};
  Tensor f = Tensor::vec({0.5, -1.5});
  Tensor same = apply_channel(zero, f);
  CHECK(same.data == f.data);

  // Unit-power feature: normalization is the identity, so out = f + b.
  ChannelSample bias{ChannelKind::RayleighZf, {}, {0.25, -0.75}};
  Tensor unit = Tensor::vec({1.0, -1.0});  // rms = 1
  Tensor shifted = apply_channel(bias, unit);
  CHECK(shifted.data[0] == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(shifted.data[1] == doctest::Approx(-1.75).epsilon(1e-15));

  CHECK_THROWS_AS(apply_channel(mask, Tensor::vec({1.0})), std::invalid_argument);
}

TEST_CASE("distances") {
  ChannelSample mask{ChannelKind::Bec, {1.0, 0.0, 1.0, 0.0}, {}};
  CHECK(channel_distance(mask, DistanceMetric::BecFrobenius) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  ChannelSample b34{ChannelKind::RayleighZf, {}, {3.0, 4.0}};
  CHECK(channel_distance(b34, DistanceMetric::RayleighScalar) == 5.0);

  ChannelSample blocks{ChannelKind::RayleighZf, {}, {1.0, 0.0, 0.0, 2.0}};
  CHECK(channel_distance(blocks, DistanceMetric::RayleighSubchannel) == 3.0);

  CHECK_THROWS_AS(channel_distance(mask, DistanceMetric::RayleighScalar),
                  std::invalid_argument);
  CHECK_THROWS_AS(channel_distance(b34, DistanceMetric::BecFrobenius),
                  std::invalid_argument);
}

TEST_CASE("determinism: same (spec, seed, stream) gives the same samples") {
  ChannelSpec spec{ChannelKind::RayleighZf, 8, 0.0, 2.0};
  Rng a(77, "channel", 4);
  Rng b(77, "channel", 4);
  for (int i = 0; i < 50; ++i) {
    const auto sa = sample_channel(spec, a);
    const auto sb = sample_channel(spec, b);
    CHECK(sa.bias == sb.bias);
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((ChannelSpec{ChannelKind::Bec, 4, -0.1, 1.0}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((ChannelSpec{ChannelKind::RayleighZf, 5, 0.0, 1.0}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((ChannelSpec{ChannelKind::RayleighZf, 4, 0.0, 0.0}).validate(),
                  std::invalid_argument);
}

TEST_CASE("Rayleigh per-block magnitude mean matches pi/(2 sqrt(gamma))") {
  // Median-of-means against the quadrature value; the plain mean has
  // infinite variance so a robust estimator is required.
  const double gamma = 2.0;
  ChannelSpec spec{ChannelKind::RayleighZf, 8, 0.0, gamma};
  Rng rng(5, "mc");
  auto mc = mc_omega(spec, DistanceMetric::RayleighSubchannel, 200000, rng);
  const double expect = 4.0 * std::numbers::pi / (2.0 * std::sqrt(gamma));  // d/2 blocks
  CHECK(std::abs(mc.estimate - expect) < 3.0 * mc.stderr_est + 1e-9);
}
