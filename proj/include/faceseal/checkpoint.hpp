#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "faceseal/networks.hpp"

namespace faceseal {

// Checkpoint container: magic, version, a JSON header (arch config, free-form
// metadata, tensor index) and flat little-endian tensor payloads keyed by
// layer path, closed by a CRC32 of everything before it. Loading verifies the
// checksum before any state is constructed.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  torch::Tensor tensor;
};

struct CheckpointPayload {
  ArchConfig arch;
  nlohmann::json meta;  // step, rng, config echo, ...
  std::vector<NamedTensor> tensors;
};

void write_checkpoint(const std::string& path, const CheckpointPayload& payload);
CheckpointPayload read_checkpoint(const std::string& path);

/// Model-only checkpoint, enough for embed/verify/evaluate.
void save_model_checkpoint(const std::string& path, const ModelBundle& bundle,
                           const nlohmann::json& meta = nlohmann::json::object());

/// Rebuilds the bundle from the stored arch config and parameters.
ModelBundle load_model_checkpoint(const std::string& path, nlohmann::json* meta_out = nullptr);

/// Copies `tensors` with the given name prefix into the module's parameters.
/// Throws io_error on missing names or shape mismatches.
void load_module_tensors(torch::nn::Module& module, const std::string& prefix,
                         const std::vector<NamedTensor>& tensors);

void append_module_tensors(std::vector<NamedTensor>& out, const torch::nn::Module& module,
                           const std::string& prefix);

}  // namespace faceseal
