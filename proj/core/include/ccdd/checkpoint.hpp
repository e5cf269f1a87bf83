#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccdd/batch.hpp"

namespace ccdd {

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

struct NamedTensor {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;  // row-major

  static NamedTensor from_matrix(std::string name, const Matrix& m, DType dtype = DType::kF64);
  Matrix to_matrix() const;
  std::uint64_t element_count() const;

  bool operator==(const NamedTensor&) const = default;
};

/// On-disk layout, all integers little-endian:
///   "CCDD" | u32 version | u64 len, config text | u64 len, vocab text |
///   u64 config hash | i64 step | u64 rng seed | u64 rng counter |
///   u64 tensor count | tensors...
/// Each tensor: u64 len, name | u8 dtype | u32 rank | u64 dims[rank] | payload.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string config_text;
  std::string vocab_text;
  std::uint64_t config_hash = 0;
  std::int64_t step = 0;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_counter = 0;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  const NamedTensor& at(const std::string& name) const;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError with a specific code.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Writes a latent tensor alone in the checkpoint container.
void save_tensor_file(const std::string& path, const std::vector<NamedTensor>& tensors);

}  // namespace ccdd
