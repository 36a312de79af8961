#include "doctest.h"

#include <cmath>
#include <vector>

#include "chanpac/network.hpp"
#include "test_util.hpp"

using namespace chanpac;

namespace {

// Straightforward re-implementation of the forward pass used as the oracle:
// per layer, y_r = b_r + sum_c W_rc x_c, then the activation.
std::vector<double> naive_forward(const NetworkSpec& spec,
                                  const ParamVector& params,
                                  std::vector<double> x) {
  const auto layers = unflatten(spec, params);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = spec.layers[i];
    std::vector<double> y(l.out_dim);
    for (std::size_t r = 0; r < l.out_dim; ++r) {
      double acc = layers[i].bias[r];
      for (std::size_t c = 0; c < l.in_dim; ++c)
        acc += layers[i].weights[r * l.in_dim + c] * x[c];
      y[r] = l.act == Activation::Relu ? std::max(0.0, acc) : acc;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("single identity-weight relu layer") {
  NetworkSpec spec;
  spec.layers = {{2, 2, Activation::Relu}};
  spec.split_index = 1;
  spec.classes = 2;
  ParamVector p = {1.0, 0.0, 0.0, 1.0, 0.0, 0.0};  // W = I, b = 0
  Tensor out = forward(spec, p, Tensor::vec({1.0, -2.0}));
  CHECK(out.data[0] == 1.0);
  CHECK(out.data[1] == 0.0);
}

TEST_CASE("identity channel sample leaves logits bit-identical") {
  auto c = testutil::seeded_case(11, 4, 6, 6, 3, 1, 2);
  Tensor input = Tensor::vec({0.3, -1.2, 0.8, 2.0});
  Tensor plain = forward(c.spec, c.params, input);

  ChannelSample id;
  id.kind = ChannelKind::Identity;
  Tensor with_id = forward(c.spec, c.params, input, &id);
  for (std::size_t i = 0; i < plain.size(); ++i)
    CHECK(plain.data[i] == with_id.data[i]);

  // BEC all-ones mask and Rayleigh zero bias also act as the identity.
  ChannelSample ones;
  ones.kind = ChannelKind::Bec;
  ones.mask.assign(6, 1.0);
  Tensor with_ones = forward(c.spec, c.params, input, &ones);
  ChannelSample zero_bias;
  zero_bias.kind = ChannelKind::RayleighZf;
  zero_bias.bias.assign(6, 0.0);
  Tensor with_zero = forward(c.spec, c.params, input, &zero_bias);
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK(plain.data[i] == with_ones.data[i]);
    CHECK(plain.data[i] == with_zero.data[i]);
  }
}

TEST_CASE("seeded 784-64-32-10 forward matches the naive oracle") {
  NetworkSpec spec;
  spec.layers = {{784, 64, Activation::Relu},
                 {64, 32, Activation::Relu},
                 {32, 10, Activation::Identity}};
  spec.split_index = 3;
  spec.classes = 10;
  Rng rng(2024, "oracle");
  ParamVector params = init_params(spec, 0.05, rng);
  std::vector<double> x(784);
  for (double& v : x) v = rng.uniform();

  Tensor out = forward(spec, params, Tensor::vec(x));
  const auto expect = naive_forward(spec, params, x);
  REQUIRE(out.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(out.data[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("forward rejects dimension mismatches") {
  auto c = testutil::seeded_case(1);
  CHECK_THROWS_AS(forward(c.spec, c.params, Tensor::vec({1.0})),
                  std::invalid_argument);
  ChannelSample bad;
  bad.kind = ChannelKind::Bec;
  bad.mask.assign(3, 1.0);  // split dim is 8 here
  CHECK_THROWS(forward(c.spec, c.params, Tensor::vec({1, 0, 0, 0, 0}), &bad));
}

TEST_CASE("losses") {
  CHECK(loss_01(Tensor::vec({10, 0, 0}), 0) == 0.0);
  CHECK(loss_01(Tensor::vec({0, 0, 0}), 0) == 0.0);  // tie -> smallest index
  CHECK(loss_01(Tensor::vec({0, 0, 0}), 1) == 1.0);
  CHECK(loss_ce(Tensor::vec({0, 0}), 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // direct softmax evaluation
  const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  const double expect = -std::log(e1 / (e1 + e2 + e3));
  CHECK(loss_ce(Tensor::vec({1, 2, 3}), 0) == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS_AS(loss_ce(Tensor::vec({0, 0}), 2), std::invalid_argument);
  CHECK_THROWS_AS(loss_01(Tensor::vec({0, 0}), -1), std::invalid_argument);
}

TEST_CASE("softmax-CE gradient identity on a 1-layer net") {
  NetworkSpec spec;
  spec.layers = {{2, 2, Activation::Identity}};
  spec.split_index = 1;
  spec.classes = 2;
  ParamVector w = {0.5, -0.3, 0.2, 0.7, 0.1, -0.1};
  std::vector<double> x = {1.5, -0.5};
  std::vector<int> y = {1};
  auto b = backward(spec, w, x, y);

  Tensor logits = forward(spec, w, Tensor::vec(x));
  std::vector<double> p;
  softmax_into(logits, p);
  p[1] -= 1.0;  // softmax(z) - onehot
  CHECK(b.grads[0] == doctest::Approx(p[0] * x[0]).epsilon(1e-12));
  CHECK(b.grads[1] == doctest::Approx(p[0] * x[1]).epsilon(1e-12));
  CHECK(b.grads[2] == doctest::Approx(p[1] * x[0]).epsilon(1e-12));
  CHECK(b.grads[3] == doctest::Approx(p[1] * x[1]).epsilon(1e-12));
  CHECK(b.grads[4] == doctest::Approx(p[0]).epsilon(1e-12));
  CHECK(b.grads[5] == doctest::Approx(p[1]).epsilon(1e-12));
}

TEST_CASE("zero-weight net on balanced labels has zero output-bias gradient") {
  NetworkSpec spec;
  spec.layers = {{2, 2, Activation::Identity}};
  spec.split_index = 1;
  spec.classes = 2;
  ParamVector w(6, 0.0);
  std::vector<double> x = {1.0, 2.0, -0.5, 0.3};
  std::vector<int> y = {0, 1};
  auto b = backward(spec, w, x, y);
  CHECK(b.grads[4] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(b.grads[5] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("backward matches central finite differences") {
  for (std::uint64_t seed : {3u, 17u, 99u}) {
    auto c = testutil::seeded_case(seed);
    CHECK(testutil::max_grad_rel_error(c.spec, c.params, c.feats, c.labels) < 1e-4);
  }
}

TEST_CASE("backward with a constant channel sample still passes the FD check") {
  auto c = testutil::seeded_case(5);
  Rng rng(5, "channel");
  ChannelSpec bec{ChannelKind::Bec, c.spec.split_dim(), 0.4, 1.0};
  auto mask = sample_channel(bec, rng);
  CHECK(testutil::max_grad_rel_error(c.spec, c.params, c.feats, c.labels, &mask) < 1e-4);

  ChannelSpec ray{ChannelKind::RayleighZf, c.spec.split_dim(), 0.0, 2.0};
  auto bias = sample_channel(ray, rng);
  CHECK(testutil::max_grad_rel_error(c.spec, c.params, c.feats, c.labels, &bias) < 1e-4);
}

TEST_CASE("backward rejects an empty batch") {
  auto c = testutil::seeded_case(1);
  std::vector<double> feats;
  std::vector<int> labels;
  CHECK_THROWS_AS(backward(c.spec, c.params, feats, labels), std::invalid_argument);
}

TEST_CASE("flatten/unflatten round-trips for generated specs") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Rng rng(seed, "layout");
    NetworkSpec spec;
    std::size_t prev = 2 + static_cast<std::size_t>(rng.uniform() * 6);
    const int n_layers = 1 + static_cast<int>(rng.uniform() * 4);
    for (int i = 0; i < n_layers; ++i) {
      std::size_t next = 2 + static_cast<std::size_t>(rng.uniform() * 6);
      spec.layers.push_back({prev, next,
                             rng.uniform() < 0.5 ? Activation::Relu
                                                 : Activation::Identity});
      prev = next;
    }
    spec.classes = prev;
    spec.split_index = 1 + static_cast<std::size_t>(
                               rng.uniform() * static_cast<double>(n_layers + 1));
    ParamVector p = init_params(spec, 1.0, rng);
    CHECK(flatten(spec, unflatten(spec, p)) == p);
  }
}

TEST_CASE("grad_norm") {
  std::vector<double> g = {3.0, 4.0};
  CHECK(grad_norm(g) == 5.0);
  std::vector<double> z(10, 0.0);
  CHECK(grad_norm(z) == 0.0);
  Rng rng(8, "norm");
  std::vector<double> v(257);
  double ss = 0.0;
  for (double& x : v) {
    x = rng.normal();
    ss += x * x;
  }
  CHECK(grad_norm(v) == doctest::Approx(std::sqrt(ss)).epsilon(1e-14));
}

TEST_CASE("mean 0-1 loss over a batch stays in [0,1]") {
  auto c = testutil::seeded_case(21);
  double acc = 0.0;
  const std::size_t in = c.spec.layers.front().in_dim;
  for (std::size_t i = 0; i < c.labels.size(); ++i) {
    Tensor input({in}, std::vector<double>(c.feats.begin() + i * in,
                                           c.feats.begin() + (i + 1) * in));
    const double l = loss_01(forward(c.spec, c.params, input), c.labels[i]);
    CHECK((l == 0.0 || l == 1.0));
    acc += l;
  }
  acc /= static_cast<double>(c.labels.size());
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}
