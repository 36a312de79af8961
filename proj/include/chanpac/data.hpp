#ifndef CHANPAC_DATA_HPP
#define CHANPAC_DATA_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "chanpac/rng.hpp"

namespace chanpac {

struct Dataset {
  std::size_t n = 0;
  std::size_t dim = 0;
  int classes = 0;
  std::vector<double> features;  // n x dim, row-major
  std::vector<int> labels;

  void validate() const {
    if (n < 1) throw std::invalid_argument("dataset: empty");
    if (features.size() != n * dim || labels.size() != n)
      throw std::invalid_argument("dataset: size mismatch");
    for (int l : labels)
      if (l < 0 || l >= classes)
        throw std::invalid_argument("dataset: label out of range");
  }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("idx: truncated file " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace detail

// MNIST-style IDX pair: big-endian, u8 pixels scaled to [0, 1].
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);

  if (detail::read_be32(img, images_path) != 0x00000803u)
    throw std::runtime_error("idx: bad image magic in " + images_path);
  if (detail::read_be32(lab, labels_path) != 0x00000801u)
    throw std::runtime_error("idx: bad label magic in " + labels_path);

  const std::uint32_t n_img = detail::read_be32(img, images_path);
  const std::uint32_t rows = detail::read_be32(img, images_path);
  const std::uint32_t cols = detail::read_be32(img, images_path);
  const std::uint32_t n_lab = detail::read_be32(lab, labels_path);
  if (n_img != n_lab)
    throw std::runtime_error("idx: image/label count mismatch (" +
                             std::to_string(n_img) + " vs " +
                             std::to_string(n_lab) + ")");

  Dataset ds;
  ds.n = n_img;
  ds.dim = static_cast<std::size_t>(rows) * cols;
  ds.features.resize(ds.n * ds.dim);
  ds.labels.resize(ds.n);

  std::vector<unsigned char> buf(ds.n * ds.dim);
  if (!img.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size())))
    throw std::runtime_error("idx: truncated file " + images_path);
  for (std::size_t i = 0; i < buf.size(); ++i)
    ds.features[i] = buf[i] / 255.0;

  std::vector<unsigned char> lbuf(ds.n);
  if (!lab.read(reinterpret_cast<char*>(lbuf.data()),
                static_cast<std::streamsize>(lbuf.size())))
    throw std::runtime_error("idx: truncated file " + labels_path);
  int max_label = 0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    ds.labels[i] = lbuf[i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.classes = std::max(10, max_label + 1);
  ds.validate();
  return ds;
}

// Writes a dataset back out as an IDX pair (features quantized to u8).
// Shapes the image block as n x dim x 1.
inline void save_idx(const Dataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot write " + images_path);
  detail::write_be32(img, 0x00000803u);
  detail::write_be32(img, static_cast<std::uint32_t>(ds.n));
  detail::write_be32(img, static_cast<std::uint32_t>(ds.dim));
  detail::write_be32(img, 1u);
  for (double v : ds.features) {
    const double clamped = std::min(1.0, std::max(0.0, v));
    const unsigned char b = static_cast<unsigned char>(clamped * 255.0 + 0.5);
    img.write(reinterpret_cast<const char*>(&b), 1);
  }

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot write " + labels_path);
  detail::write_be32(lab, 0x00000801u);
  detail::write_be32(lab, static_cast<std::uint32_t>(ds.n));
  for (int l : ds.labels) {
    const unsigned char b = static_cast<unsigned char>(l);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
}

// Class-balanced Gaussian clusters at scaled coordinate-axis vertices.
inline Dataset make_blobs(std::size_t n, std::size_t dim, int classes,
                          double spread, std::uint64_t seed) {
  if (classes < 1 || dim < 1 || n < static_cast<std::size_t>(classes))
    throw std::invalid_argument("make_blobs: need n >= classes >= 1, dim >= 1");
  Dataset ds;
  ds.n = n;
  ds.dim = dim;
  ds.classes = classes;
  ds.features.resize(n * dim);
  ds.labels.resize(n);
  Rng rng(seed, "blobs");
  const double scale = 3.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
    ds.labels[i] = c;
    for (std::size_t j = 0; j < dim; ++j) {
      const double center =
          (j == static_cast<std::size_t>(c) % dim) ? scale : 0.0;
      ds.features[i * dim + j] = center + spread * rng.normal();
    }
  }
  ds.validate();
  return ds;
}

inline Dataset take_first(const Dataset& ds, std::size_t count) {
  if (count < 1 || count > ds.n)
    throw std::invalid_argument("take_first: bad count");
  Dataset out;
  out.n = count;
  out.dim = ds.dim;
  out.classes = ds.classes;
  out.features.assign(ds.features.begin(),
                      ds.features.begin() + count * ds.dim);
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + count);
  return out;
}

// Deterministic Fisher-Yates permutation of the sample order.
inline Dataset shuffled(const Dataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> idx(ds.n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, "shuffle");
  for (std::size_t i = ds.n; i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
  Dataset out;
  out.n = ds.n;
  out.dim = ds.dim;
  out.classes = ds.classes;
  out.features.resize(ds.n * ds.dim);
  out.labels.resize(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    std::copy(ds.features.begin() + idx[i] * ds.dim,
              ds.features.begin() + (idx[i] + 1) * ds.dim,
              out.features.begin() + i * ds.dim);
    out.labels[i] = ds.labels[idx[i]];
  }
  return out;
}

// Label histogram, e.g. for subset-selection reporting.
inline std::vector<std::size_t> label_counts(const Dataset& ds) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(ds.classes), 0);
  for (int l : ds.labels) counts[static_cast<std::size_t>(l)]++;
  return counts;
}

}  // namespace chanpac

#endif
