#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "specalign/models.hpp"
#include "specalign/tensor.hpp"

namespace specalign {

/// Named-tensor container with a versioned binary format:
///   magic "SPDT", version u32, tensor count u32, then per tensor
///   name length u16 + UTF-8 name, rank u8, dims as u64 little-endian,
///   payload as little-endian 64-bit floats.
/// Loading a saved file reproduces every tensor bitwise. Magic or version
/// mismatch, truncation, and dimension overflow raise IoError with
/// distinct messages and nothing is partially loaded.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;

  void put(std::string name, Tensor value);
  const Tensor* find(const std::string& name) const;
  const Tensor& require(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Graph and optimizer payload helpers. Architectures are encoded as meta
// tensors so a checkpoint alone reconstructs the networks.
void pack_net(Checkpoint& ckpt, const std::string& prefix, const NetSpec& spec, const Graph& g);
std::pair<NetSpec, Graph> unpack_net(const Checkpoint& ckpt, const std::string& prefix);

void pack_optimizer(Checkpoint& ckpt, const std::string& prefix, const OptimizerState& state);
void unpack_optimizer(const Checkpoint& ckpt, const std::string& prefix, OptimizerState& state);

void pack_scalar(Checkpoint& ckpt, const std::string& name, double value);
double unpack_scalar(const Checkpoint& ckpt, const std::string& name);

}  // namespace specalign
