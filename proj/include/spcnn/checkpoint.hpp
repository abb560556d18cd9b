#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "spcnn/errors.hpp"
#include "spcnn/net.hpp"
#include "spcnn/pyramid.hpp"

namespace spcnn {

/// Everything needed to resume or evaluate a run. Round-trips bit-exactly.
struct Checkpoint {
  NetworkSpec spec;
  NetworkState state;
  ParamSet momentum;  // optimizer velocity buffers; may be empty
  uint64_t iteration = 0;
  MeanImage mean;
  std::vector<std::string> class_names;  // may be empty for untrained states
};

// File layout, little-endian throughout:
//   magic "SPCN", u32 version,
//   then sections in fixed order, each: u32 name length, name bytes,
//   u64 payload length, payload.
// Sections: spec (canonical text), seed (u64), state (tensor set),
// momentum (tensor set), iter (u64), mean (single tensor).
// Tensor set: u32 count, then per tensor u32 name length, name, u32 rank,
// u32 dims..., raw f32 data.

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }

class ByteReader {
 public:
  ByteReader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(uint64_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(uint64_t n) {
    if (pos_ + n > buf_.size()) throw CheckpointCorruptError(path_ + ": truncated checkpoint");
  }
  const std::string& buf_;
  std::string path_;
  size_t pos_ = 0;
};

inline void put_tensor(std::string& out, const Tensor& t) {
  put_u32(out, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) put_u32(out, static_cast<uint32_t>(t.dim(i)));
  for (int64_t i = 0; i < t.size(); ++i) put_f32(out, t[i]);
}

inline Tensor read_tensor(ByteReader& r) {
  const uint32_t rank = r.u32();
  if (rank > 8) throw CheckpointCorruptError("implausible tensor rank in checkpoint");
  if (rank == 0) return Tensor();
  std::vector<int> shape(rank);
  for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(r.u32());
  Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = r.f32();
  return t;
}

inline void put_tensor_set(std::string& out, const ParamSet& set) {
  put_u32(out, static_cast<uint32_t>(set.tensors.size()));
  for (const NamedTensor& t : set.tensors) {
    put_u32(out, static_cast<uint32_t>(t.name.size()));
    out.append(t.name);
    put_tensor(out, t.value);
  }
}

inline ParamSet read_tensor_set(ByteReader& r) {
  ParamSet set;
  const uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t len = r.u32();
    std::string name = r.bytes(len);
    set.tensors.push_back({std::move(name), read_tensor(r)});
  }
  return set;
}

inline void put_section(std::string& out, const std::string& name, const std::string& payload) {
  put_u32(out, static_cast<uint32_t>(name.size()));
  out.append(name);
  put_u64(out, payload.size());
  out.append(payload);
}

}  // namespace detail

inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string out;
  out.append("SPCN");
  detail::put_u32(out, kCheckpointVersion);

  detail::put_section(out, "spec", spec_to_text(ck.spec));

  std::string seed;
  detail::put_u64(seed, ck.state.seed);
  detail::put_section(out, "seed", seed);

  std::string state;
  detail::put_tensor_set(state, ck.state.params);
  detail::put_section(out, "state", state);

  std::string momentum;
  detail::put_tensor_set(momentum, ck.momentum);
  detail::put_section(out, "momentum", momentum);

  std::string iter;
  detail::put_u64(iter, ck.iteration);
  detail::put_section(out, "iter", iter);

  std::string mean;
  detail::put_tensor(mean, ck.mean.values.empty() ? Tensor() : ck.mean.values);
  detail::put_section(out, "mean", mean);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path);
}

// Standalone tensor file (used for the mean image): magic "SPTN",
// u32 version, then the checkpoint tensor encoding.
inline void save_tensor_file(const std::string& path, const Tensor& t) {
  std::string out;
  out.append("SPTN");
  detail::put_u32(out, kCheckpointVersion);
  detail::put_tensor(out, t);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path);
}

inline Tensor load_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  detail::ByteReader r(buf, path);
  if (r.bytes(4) != "SPTN") throw CheckpointCorruptError(path + ": bad magic, not a tensor file");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointVersionError(path + ": tensor file version " + std::to_string(version));
  Tensor t = detail::read_tensor(r);
  if (r.remaining() != 0) throw CheckpointCorruptError(path + ": trailing bytes");
  return t;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  detail::ByteReader r(buf, path);
  if (r.bytes(4) != "SPCN") throw CheckpointCorruptError(path + ": bad magic, not a checkpoint");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointVersionError(path + ": checkpoint version " + std::to_string(version) +
                                 ", expected " + std::to_string(kCheckpointVersion));

  Checkpoint ck;
  const char* expected[] = {"spec", "seed", "state", "momentum", "iter", "mean"};
  for (const char* name : expected) {
    const uint32_t nlen = r.u32();
    const std::string sname = r.bytes(nlen);
    if (sname != name)
      throw CheckpointCorruptError(path + ": expected section '" + name + "', found '" + sname + "'");
    const uint64_t plen = r.u64();
    std::string payload = r.bytes(plen);
    detail::ByteReader pr(payload, path);
    if (sname == "spec") {
      ck.spec = spec_from_text(payload);
    } else if (sname == "seed") {
      ck.state.seed = pr.u64();
    } else if (sname == "state") {
      ck.state.params = detail::read_tensor_set(pr);
    } else if (sname == "momentum") {
      ck.momentum = detail::read_tensor_set(pr);
    } else if (sname == "iter") {
      ck.iteration = pr.u64();
    } else if (sname == "mean") {
      Tensor t = detail::read_tensor(pr);
      if (!t.empty()) ck.mean.values = std::move(t);
    }
  }
  if (r.remaining() != 0) throw CheckpointCorruptError(path + ": trailing bytes after checkpoint");

  // Shape consistency between spec and state.
  const NetworkState reference = init_params(ck.spec, 0);
  if (reference.params.tensors.size() != ck.state.params.tensors.size())
    throw CheckpointCorruptError(path + ": state tensor count does not match network spec");
  for (size_t i = 0; i < reference.params.tensors.size(); ++i) {
    const NamedTensor& want = reference.params.tensors[i];
    const NamedTensor& got = ck.state.params.tensors[i];
    if (want.name != got.name || want.value.shape() != got.value.shape())
      throw CheckpointCorruptError(path + ": state tensor '" + got.name +
                                   "' does not match network spec");
  }
  return ck;
}

}  // namespace spcnn
