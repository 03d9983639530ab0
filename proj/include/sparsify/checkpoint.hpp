// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

// Binary checkpoint, little-endian:
//
//   "SPRSCKPT"  u32 version  u64 payload_bytes  payload  u32 crc32
//
// The CRC covers everything before it. The payload holds the precision, epoch
// and iteration counters, the configuration echo, the shuffling RNG state,
// named parameter tensors (raw values at the run precision), per-layer bounds
// with bit-packed masks, momentum buffers and batch-norm running statistics.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sparsify/network.hpp"
#include "sparsify/train.hpp"

namespace sparsify {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;  // exact for both precisions
};

struct LayerRecord {
  std::string name;
  double bound = 0.0;  // relative
  std::uint64_t count = 0;
  std::vector<std::uint8_t> mask;  // bit-packed, LSB first
};

struct Checkpoint {
  std::uint32_t precision = 32;
  std::uint64_t epoch = 0;
  std::uint64_t iteration = 0;
  std::string config_json;
  std::string rng_state;
  std::vector<TensorRecord> params;
  std::vector<LayerRecord> layers;
  std::vector<TensorRecord> velocity;
  std::vector<TensorRecord> buffers;
};

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> flags);
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed,
                                      std::size_t count);

/// Serialized bytes of a checkpoint (header, payload and checksum).
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointTruncatedError, CheckpointChecksumError,
/// CheckpointVersionError, or CheckpointError for a foreign file.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
Checkpoint capture(Network<T>& net, const TrainState<T>& state,
                   const std::string& config_json);

/// Copies the checkpoint into `net` and `state`. Every record is checked
/// against the network first, so on error nothing has been modified.
template <typename T>
void restore(const Checkpoint& ckpt, Network<T>& net, TrainState<T>& state);

}  // namespace sparsify
