#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tlmg/numerics/tensor.hpp"

namespace tlmg::nn {

inline constexpr int kCheckpointFormatVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Checkpoint file layout:
///
///   line 1   JSON header terminated by '\n':
///            {"format_version": 1,
///             "tensors": [{"name": ..., "shape": [...]}, ...],
///             "hyperparameters": {...}}
///   rest     raw little-endian IEEE-754 doubles for every tensor, in header
///            order, each tensor row-major
struct Checkpoint {
  nlohmann::json hyperparameters = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Tensor& find(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameters -> named tensors (values copied).
std::vector<NamedTensor> snapshot(const ParameterStore& store,
                                  const std::string& prefix = "");
// Copies matching tensors back into the store; shapes must agree. Every
// parameter of the store must be present.
void restore(ParameterStore& store, const Checkpoint& ckpt,
             const std::string& prefix = "");

}  // namespace tlmg::nn
