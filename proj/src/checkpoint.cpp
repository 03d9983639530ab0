// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/checkpoint.hpp"

#include <algorithm>
#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sparsify/errors.hpp"

namespace sparsify {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'R', 'S', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeader = 8 + 4 + 8;

class Writer {
 public:
  explicit Writer(std::uint32_t precision) : precision_(precision) {}
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void bytes(std::span<const std::uint8_t> b) {
    u64(b.size());
    out_.insert(out_.end(), b.begin(), b.end());
  }
  void tensor(const TensorRecord& t) {
    str(t.name);
    u32(static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) u64(d);
    u64(t.values.size());
    for (double v : t.values) {
      if (precision_ == 32) u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      else f64(v);
    }
  }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::uint32_t precision_;
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void need(std::size_t n) const {
    if (pos_ + n > in_.size())
      throw CheckpointError("checkpoint payload is malformed (record overruns)");
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<std::uint8_t> bytes() {
    const std::uint64_t n = u64();
    need(n);
    std::vector<std::uint8_t> b(in_.begin() + pos_, in_.begin() + pos_ + n);
    pos_ += n;
    return b;
  }
  TensorRecord tensor(std::uint32_t precision) {
    TensorRecord t;
    t.name = str();
    const std::uint32_t rank = u32();
    for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(u64());
    const std::uint64_t n = u64();
    need(n * (precision == 32 ? 4 : 8));
    t.values.resize(n);
    for (double& v : t.values)
      v = precision == 32 ? double(std::bit_cast<float>(u32())) : f64();
    return t;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> b) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < b.size()) {
    const std::size_t chunk = std::min<std::size_t>(b.size() - off, 1u << 30);
    crc = crc32(crc, b.data() + off, static_cast<uInt>(chunk));
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void write_tensors(Writer& w, const std::vector<TensorRecord>& ts) {
  w.u64(ts.size());
  for (const auto& t : ts) w.tensor(t);
}

std::vector<TensorRecord> read_tensors(Reader& r, std::uint32_t precision) {
  std::vector<TensorRecord> ts(r.u64());
  for (auto& t : ts) t = r.tensor(precision);
  return ts;
}

}  // namespace

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> flags) {
  std::vector<std::uint8_t> out((flags.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) out[i / 8] |= std::uint8_t(1u << (i % 8));
  return out;
}

std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed,
                                      std::size_t count) {
  if (packed.size() != (count + 7) / 8)
    throw CheckpointError("mask holds " + std::to_string(packed.size()) +
                          " bytes for " + std::to_string(count) + " flags");
  std::vector<std::uint8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = (packed[i / 8] >> (i % 8)) & 1u;
  return out;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  if (c.precision != 32 && c.precision != 64)
    throw ContractError("checkpoint precision must be 32 or 64");
  Writer p(c.precision);
  p.u32(c.precision);
  p.u64(c.epoch);
  p.u64(c.iteration);
  p.str(c.config_json);
  p.str(c.rng_state);
  write_tensors(p, c.params);
  p.u64(c.layers.size());
  for (const auto& l : c.layers) {
    p.str(l.name);
    p.f64(l.bound);
    p.u64(l.count);
    p.bytes(l.mask);
  }
  write_tensors(p, c.velocity);
  write_tensors(p, c.buffers);

  Writer out(c.precision);
  for (char ch : kMagic) out.u8(static_cast<std::uint8_t>(ch));
  out.u32(kCheckpointVersion);
  out.u64(p.data().size());
  auto& bytes = out.data();
  bytes.insert(bytes.end(), p.data().begin(), p.data().end());
  out.u32(crc_of(bytes));
  return std::move(bytes);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  const std::size_t seen = std::min<std::size_t>(bytes.size(), 8);
  if (std::memcmp(bytes.data(), kMagic, seen) != 0)
    throw CheckpointError("not a sparsify checkpoint (bad magic)");
  if (bytes.size() < 8) throw CheckpointTruncatedError("checkpoint truncated inside the magic");
  if (bytes.size() < kHeader + 4)
    throw CheckpointTruncatedError("checkpoint truncated inside the header");
  Reader header(bytes.subspan(8, 12));
  const std::uint32_t version = header.u32();
  const std::uint64_t payload = header.u64();
  if (payload > bytes.size() || bytes.size() < kHeader + payload + 4)
    throw CheckpointTruncatedError("checkpoint truncated: expected " +
                                   std::to_string(kHeader + payload + 4) +
                                   " bytes, found " + std::to_string(bytes.size()));
  if (bytes.size() != kHeader + payload + 4)
    throw CheckpointChecksumError("checkpoint has trailing bytes");
  Reader trailer(bytes.subspan(kHeader + payload, 4));
  if (trailer.u32() != crc_of(bytes.first(kHeader + payload)))
    throw CheckpointChecksumError("checkpoint checksum mismatch");
  if (version != kCheckpointVersion)
    throw CheckpointVersionError("checkpoint version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");

  Reader r(bytes.subspan(kHeader, payload));
  Checkpoint c;
  c.precision = r.u32();
  if (c.precision != 32 && c.precision != 64)
    throw CheckpointError("checkpoint precision field is invalid");
  c.epoch = r.u64();
  c.iteration = r.u64();
  c.config_json = r.str();
  c.rng_state = r.str();
  c.params = read_tensors(r, c.precision);
  c.layers.resize(r.u64());
  for (auto& l : c.layers) {
    l.name = r.str();
    l.bound = r.f64();
    l.count = r.u64();
    l.mask = r.bytes();
    if (l.mask.size() != (l.count + 7) / 8)
      throw CheckpointError("mask of layer '" + l.name + "' has the wrong length");
  }
  c.velocity = read_tensors(r, c.precision);
  c.buffers = read_tensors(r, c.precision);
  if (!r.done()) throw CheckpointError("checkpoint payload has unread bytes");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

template <typename T>
Checkpoint capture(Network<T>& net, const TrainState<T>& state,
                   const std::string& config_json) {
  Checkpoint c;
  c.precision = sizeof(T) == 4 ? 32 : 64;
  c.epoch = state.epoch;
  c.iteration = state.iteration;
  c.config_json = config_json;
  std::ostringstream rng;
  rng << state.rng;
  c.rng_state = rng.str();
  const auto params = net.parameters();
  if (state.velocity.size() != params.size())
    throw ContractError("training state does not match the network");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor<T>& t = *params[i].tensor;
    c.params.push_back({params[i].name, t.shape(),
                        std::vector<double>(t.values().begin(), t.values().end())});
    c.velocity.push_back({params[i].name, t.shape(),
                          std::vector<double>(state.velocity[i].begin(),
                                              state.velocity[i].end())});
  }
  for (const auto* p : std::as_const(net).prunable())
    c.layers.push_back({p->name, p->relative_bound(), p->mask.size(), pack_bits(p->mask)});
  for (const auto& b : net.buffers())
    c.buffers.push_back({b.name, Shape{b.values->size()},
                         std::vector<double>(b.values->begin(), b.values->end())});
  return c;
}

template <typename T>
void restore(const Checkpoint& c, Network<T>& net, TrainState<T>& state) {
  const std::uint32_t precision = sizeof(T) == 4 ? 32 : 64;
  if (c.precision != precision)
    throw CheckpointError("checkpoint was written at " + std::to_string(c.precision) +
                          "-bit precision, run is " + std::to_string(precision) + "-bit");
  auto params = net.parameters();
  auto buffers = net.buffers();
  auto prunable = net.prunable();
  auto mismatch = [](const std::string& what) {
    return CheckpointError("checkpoint does not match the network: " + what);
  };
  if (c.params.size() != params.size() || c.velocity.size() != params.size())
    throw mismatch("parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (c.params[i].name != params[i].name || c.params[i].shape != params[i].tensor->shape())
      throw mismatch("parameter '" + params[i].name + "'");
    if (c.velocity[i].values.size() != params[i].tensor->size())
      throw mismatch("momentum of '" + params[i].name + "'");
  }
  if (c.layers.size() != prunable.size()) throw mismatch("prunable layer count");
  for (std::size_t i = 0; i < prunable.size(); ++i)
    if (c.layers[i].name != prunable[i]->name ||
        c.layers[i].count != prunable[i]->weights.size())
      throw mismatch("layer '" + prunable[i]->name + "'");
  if (c.buffers.size() != buffers.size()) throw mismatch("buffer count");
  for (std::size_t i = 0; i < buffers.size(); ++i)
    if (c.buffers[i].name != buffers[i].name ||
        c.buffers[i].values.size() != buffers[i].values->size())
      throw mismatch("buffer '" + buffers[i].name + "'");
  std::mt19937_64 rng;
  std::istringstream rs(c.rng_state);
  rs >> rng;
  if (!rs) throw CheckpointError("checkpoint RNG state is unreadable");

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor->values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(c.params[i].values[k]);
    state.velocity.resize(params.size());
    state.velocity[i].assign(c.velocity[i].values.size(), T(0));
    for (std::size_t k = 0; k < dst.size(); ++k)
      state.velocity[i][k] = static_cast<T>(c.velocity[i].values[k]);
  }
  for (std::size_t i = 0; i < prunable.size(); ++i) {
    prunable[i]->mask = unpack_bits(c.layers[i].mask, c.layers[i].count);
    prune::refresh_statistics(*prunable[i]);
  }
  for (std::size_t i = 0; i < buffers.size(); ++i)
    for (std::size_t k = 0; k < buffers[i].values->size(); ++k)
      (*buffers[i].values)[k] = static_cast<T>(c.buffers[i].values[k]);
  state.epoch = c.epoch;
  state.iteration = c.iteration;
  state.rng = rng;
}

template Checkpoint capture(Network<float>&, const TrainState<float>&, const std::string&);
template Checkpoint capture(Network<double>&, const TrainState<double>&, const std::string&);
template void restore(const Checkpoint&, Network<float>&, TrainState<float>&);
template void restore(const Checkpoint&, Network<double>&, TrainState<double>&);

}  // namespace sparsify
