#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "prodsc/network.hpp"

namespace prodsc {

// Checkpoint file: magic "PDSCCKPT", one version byte, then length-prefixed
// parameter tensors in declaration order (u64 little-endian length followed
// by that many f64 little-endian values).
inline constexpr char kCheckpointMagic[8] = {'P', 'D', 'S', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

namespace detail {

// Visits every parameter tensor of a HeadPair in declaration order.
inline void visit_tensors(HeadPair& p, const std::function<void(std::vector<double>&)>& fn) {
  std::vector<double> scratch;
  for (MlpParams* mlp : {&p.prefeature_f, &p.prefeature_h, &p.head_f, &p.head_h}) {
    for (Layer& l : mlp->layers) {
      fn(l.W.storage());
      fn(l.b);
      if (l.batchnorm) {
        fn(l.bn_scale);
        fn(l.bn_shift);
        fn(l.bn_run_mean);
        fn(l.bn_run_var);
      }
    }
  }
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw TruncatedFile("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& os, const double* p, std::size_t n) {
  // little-endian host assumed; asserting here keeps the format honest
  static_assert(sizeof(double) == 8);
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(8 * n));
}

}  // namespace detail

inline void save_checkpoint(HeadPair& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoFailure("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 8);
  os.put(static_cast<char>(kCheckpointVersion));
  detail::visit_tensors(params, [&](std::vector<double>& t) {
    detail::write_u64(os, t.size());
    detail::write_f64(os, t.data(), t.size());
  });
  if (!os) throw IoFailure("checkpoint write failed: " + path);
}

// Fills an already-constructed HeadPair (the architecture comes from the
// training config); lengths must match tensor for tensor.
inline void load_checkpoint(HeadPair& params, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoFailure("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw BadMagic("checkpoint: bad magic");
  const int version = is.get();
  if (version != kCheckpointVersion) throw BadMagic("checkpoint: unsupported version");
  detail::visit_tensors(params, [&](std::vector<double>& t) {
    const std::uint64_t len = detail::read_u64(is);
    if (len != t.size()) throw TruncatedFile("checkpoint: tensor length mismatch");
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(8 * len));
    if (!is) throw TruncatedFile("checkpoint: truncated tensor data");
  });
}

}  // namespace prodsc
