#pragma once

#include <string>
#include <vector>

#include "s2s/nn.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

struct CheckpointEntry {
  std::string name;
  Tensor tensor;
};

// Ordered named tensors; the on-disk order is the save order.
using CheckpointData = std::vector<CheckpointEntry>;

// Flat binary container: magic "S2SCKPT1", u32 version, u64 entry count, then
// per entry u32 name length, name bytes, u32 rank, u64 extents, row-major
// little-endian f64 payload. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

CheckpointData snapshot(const std::vector<nn::Parameter*>& params);
void save_checkpoint(const std::string& path, const std::vector<nn::Parameter*>& params);

// Copies values into matching parameters. The name sets must be identical and
// shapes must match.
void load_into(const CheckpointData& data, const std::vector<nn::Parameter*>& params);

const Tensor* find_entry(const CheckpointData& data, const std::string& name);

}  // namespace s2s
