#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "chanpac/data.hpp"
#include "chanpac/io.hpp"
#include "chanpac/network.hpp"

using namespace chanpac;

namespace {

std::string tmp_path(const std::string& name) {
  return std::string("chanpac_test_") + name;
}

}  // namespace

TEST_CASE("IDX round-trip reproduces a synthetic dataset exactly") {
  Dataset ds = make_blobs(40, 12, 4, 0.2, 9);
  // snap features onto the u8 grid so the round trip is exact
  for (double& v : ds.features) {
    v = std::min(1.0, std::max(0.0, v / 4.0));
    v = static_cast<unsigned char>(v * 255.0 + 0.5) / 255.0;
  }
  const auto img = tmp_path("rt.images"), lab = tmp_path("rt.labels");
  save_idx(ds, img, lab);
  Dataset back = load_idx(img, lab);
  CHECK(back.n == ds.n);
  CHECK(back.dim == ds.dim);
  CHECK(back.features == ds.features);
  CHECK(back.labels == ds.labels);
  std::remove(img.c_str());
  std::remove(lab.c_str());
}

TEST_CASE("pixel scaling endpoints") {
  Dataset ds;
  ds.n = 2;
  ds.dim = 1;
  ds.classes = 10;
  ds.features = {0.0, 1.0};
  ds.labels = {0, 1};
  const auto img = tmp_path("scale.images"), lab = tmp_path("scale.labels");
  save_idx(ds, img, lab);
  Dataset back = load_idx(img, lab);
  CHECK(back.features[0] == 0.0);
  CHECK(back.features[1] == 1.0);
  std::remove(img.c_str());
  std::remove(lab.c_str());
}

TEST_CASE("bad magic and count mismatch are rejected") {
  Dataset ds = make_blobs(4, 3, 2, 0.0, 1);
  const auto img = tmp_path("bad.images"), lab = tmp_path("bad.labels");
  save_idx(ds, img, lab);

  // labels file carrying the image magic
  CHECK_THROWS_WITH_AS(load_idx(img, img), doctest::Contains("bad label magic"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(load_idx(lab, lab), doctest::Contains("bad image magic"),
                       std::runtime_error);
  CHECK_THROWS_AS(load_idx("does_not_exist.idx", lab), std::runtime_error);

  Dataset other = make_blobs(6, 3, 2, 0.0, 1);
  const auto lab6 = tmp_path("bad6.labels");
  save_idx(other, tmp_path("bad6.images"), lab6);
  CHECK_THROWS_WITH_AS(load_idx(img, lab6), doctest::Contains("count mismatch"),
                       std::runtime_error);
  std::remove(img.c_str());
  std::remove(lab.c_str());
  std::remove(lab6.c_str());
  std::remove(tmp_path("bad6.images").c_str());
}

TEST_CASE("make_blobs") {
  Dataset ds = make_blobs(4, 5, 2, 0.0, 3);
  auto counts = label_counts(ds);
  CHECK(counts[0] == 2);
  CHECK(counts[1] == 2);
  // spread 0: every sample sits exactly on its class center
  for (std::size_t i = 0; i < ds.n; ++i)
    for (std::size_t j = 0; j < ds.dim; ++j)
      CHECK(ds.features[i * ds.dim + j] ==
            (j == static_cast<std::size_t>(ds.labels[i]) ? 3.0 : 0.0));

  Dataset a = make_blobs(50, 4, 3, 0.5, 7);
  Dataset b = make_blobs(50, 4, 3, 0.5, 7);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK_THROWS_AS(make_blobs(2, 4, 3, 0.5, 7), std::invalid_argument);
}

TEST_CASE("subset selection is deterministic") {
  Dataset ds = make_blobs(30, 3, 3, 1.0, 5);
  Dataset head = take_first(ds, 10);
  CHECK(head.n == 10);
  CHECK(head.labels[0] == ds.labels[0]);

  Dataset s1 = shuffled(ds, 11);
  Dataset s2 = shuffled(ds, 11);
  CHECK(s1.features == s2.features);
  CHECK(s1.labels == s2.labels);
  // permutation preserves the label histogram
  CHECK(label_counts(s1) == label_counts(ds));
}

TEST_CASE("checkpoint round-trip for params and posteriors") {
  NetworkSpec spec;
  spec.layers = {{4, 6, Activation::Relu}, {6, 3, Activation::Identity}};
  spec.split_index = 2;
  spec.classes = 3;
  Rng rng(13, "ckpt");

  Checkpoint ck;
  ck.spec = spec;
  ck.is_posterior = false;
  ck.params = init_params(spec, 0.3, rng);
  const auto path = tmp_path("erm.cpbw");
  save_checkpoint(ck, path);
  Checkpoint back = load_checkpoint(path);
  CHECK_FALSE(back.is_posterior);
  CHECK(back.params == ck.params);
  CHECK(back.spec.split_index == 2);

  Checkpoint cp;
  cp.spec = spec;
  cp.is_posterior = true;
  cp.posterior.mu = init_params(spec, 0.3, rng);
  cp.posterior.rho.assign(cp.posterior.mu.size(), -2.0);
  save_checkpoint(cp, path);
  Checkpoint pback = load_checkpoint(path);
  CHECK(pback.is_posterior);
  CHECK(pback.posterior.mu == cp.posterior.mu);
  CHECK(pback.posterior.rho == cp.posterior.rho);

  // corrupt the magic
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("bad magic"),
                       std::runtime_error);
  std::remove(path.c_str());
}
