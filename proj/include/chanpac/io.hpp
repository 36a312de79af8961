#ifndef CHANPAC_IO_HPP
#define CHANPAC_IO_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chanpac/bound.hpp"
#include "chanpac/network.hpp"
#include "chanpac/variational.hpp"

namespace chanpac {

// Deterministic shortest round-trip formatting for doubles.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    // try shorter representations first
    for (int prec = 1; prec < 17; ++prec) {
      char b2[32];
      std::snprintf(b2, sizeof(b2), "%.*g", prec, v);
      double r2 = 0.0;
      std::sscanf(b2, "%lf", &r2);
      if (r2 == v) return b2;
    }
  }
  return buf;
}

// Checkpoint: magic "CPBW", u16 version, u8 kind (0 = deterministic params,
// 1 = posterior), network dims, then raw little-endian doubles.
struct Checkpoint {
  NetworkSpec spec;
  bool is_posterior = false;
  ParamVector params;              // kind 0
  VariationalPosterior posterior;  // kind 1
};

namespace detail {

template <class T>
void write_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));  // assumes little-endian host
  out.write(reinterpret_cast<char*>(b), sizeof(T));
}

template <class T>
T read_le(std::istream& in, const std::string& what) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T)))
    throw std::runtime_error("checkpoint: truncated reading " + what);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
  for (double d : v) write_le(out, d);
}

inline std::vector<double> read_doubles(std::istream& in, std::size_t count,
                                        const std::string& what) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = read_le<double>(in, what);
  return v;
}

}  // namespace detail

inline constexpr std::uint16_t kCheckpointVersion = 1;

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write("CPBW", 4);
  detail::write_le<std::uint16_t>(out, kCheckpointVersion);
  detail::write_le<std::uint8_t>(out, ck.is_posterior ? 1 : 0);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.spec.layers.size()));
  for (const auto& l : ck.spec.layers) {
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.in_dim));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.out_dim));
    const std::uint8_t act_code =
        l.act == Activation::Relu ? 0 : (l.act == Activation::Tanh ? 1 : 2);
    detail::write_le<std::uint8_t>(out, act_code);
  }
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.spec.split_index));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.spec.classes));
  const std::uint64_t count = ck.spec.param_count();
  detail::write_le<std::uint64_t>(out, count);
  if (ck.is_posterior) {
    detail::write_doubles(out, ck.posterior.mu);
    detail::write_doubles(out, ck.posterior.rho);
  } else {
    detail::write_doubles(out, ck.params);
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "CPBW", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const auto version = detail::read_le<std::uint16_t>(in, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  Checkpoint ck;
  ck.is_posterior = detail::read_le<std::uint8_t>(in, "kind") != 0;
  const auto n_layers = detail::read_le<std::uint32_t>(in, "layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    DenseLayerSpec l;
    l.in_dim = detail::read_le<std::uint32_t>(in, "in_dim");
    l.out_dim = detail::read_le<std::uint32_t>(in, "out_dim");
    const auto act_code = detail::read_le<std::uint8_t>(in, "activation");
    l.act = act_code == 0 ? Activation::Relu
                          : (act_code == 1 ? Activation::Tanh
                                           : Activation::Identity);
    ck.spec.layers.push_back(l);
  }
  ck.spec.split_index = detail::read_le<std::uint32_t>(in, "split_index");
  ck.spec.classes = detail::read_le<std::uint32_t>(in, "classes");
  const auto count = detail::read_le<std::uint64_t>(in, "param count");
  if (count != ck.spec.param_count())
    throw std::runtime_error("checkpoint: param count mismatch in " + path);
  if (ck.is_posterior) {
    ck.posterior.mu = detail::read_doubles(in, count, "mu");
    ck.posterior.rho = detail::read_doubles(in, count, "rho");
  } else {
    ck.params = detail::read_doubles(in, count, "params");
  }
  ck.spec.validate();
  return ck;
}

inline void write_train_stats_csv(const TrainStats& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("stats: cannot write " + path);
  out << "epoch,objective,empirical_risk,kl,khat,omega,wall_seconds\r\n";
  for (std::size_t e = 0; e < s.objective.size(); ++e)
    out << e << ',' << fmt_double(s.objective[e]) << ','
        << fmt_double(s.empirical_risk[e]) << ',' << fmt_double(s.kl[e]) << ','
        << fmt_double(s.khat[e]) << ',' << fmt_double(s.omega[e]) << ','
        << fmt_double(s.wall_seconds[e]) << "\r\n";
}

}  // namespace chanpac

#endif
