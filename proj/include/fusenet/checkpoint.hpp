#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusenet/parameters.hpp"

namespace fusenet {

/// Snapshot of a parameter registry.
///
/// On-disk layout (all integers little-endian):
///
///     "FZNT"            4 bytes magic
///     version           u16 (currently 1)
///     dtype             u8, 4 = float32 payloads, 8 = float64 payloads
///     config_hash       u64
///     epoch             u32
///     then, until end of file, one record per parameter:
///       name_length u32, name (UTF-8, no terminator),
///       rank u32, dims u32 x rank,
///       payload: prod(dims) IEEE-754 values of width dtype
template <typename T>
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint32_t epoch = 0;
  std::vector<std::pair<std::string, Tensor<T>>> tensors;

  static Checkpoint capture(const ParameterStore<T>& params, std::uint64_t config_hash = 0,
                            std::uint32_t epoch = 0);
  /// Copies every stored tensor into the same-named parameter; missing names or shape
  /// differences throw.
  void restore(ParameterStore<T>& params) const;
  /// FNV-1a of each tensor, keyed by name.
  std::vector<std::pair<std::string, std::uint64_t>> hashes() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint<T>& ckpt);

/// Decodes either payload width into T.
template <typename T>
Checkpoint<T> decode_checkpoint(std::span<const std::uint8_t> bytes);

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::string& path);

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

/// Reads only the dtype byte of a checkpoint file.
Precision checkpoint_precision(const std::string& path);

}  // namespace fusenet
