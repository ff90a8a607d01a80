#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "volplan/attention_bias.hpp"
#include "volplan/volume_lift.hpp"

// Parameter checkpoints: named tensors with declared shapes, stored as JSON
// ({"format": ..., "tensors": {name: {"shape": [...], "data": [...]}}}).
// Matrices are row-major.

namespace volplan {

inline constexpr const char* kCheckpointFormat = "volplan.ckpt/1";

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
};

using Checkpoint = std::map<std::string, Tensor>;

// Names: lift.gate_fc.weight, lift.gate_mlp.hidden.bias, lift.vacant, ...
void export_lift(const LiftParams& params, Checkpoint& out);
// Overwrites every lift tensor; throws when a tensor is missing or has the wrong shape.
void import_lift(const Checkpoint& ckpt, LiftParams& params);

// Names: attn.layer<l>.head<h>.bins_{x,y,z,p} and .text_to_visual / .visual_to_text.
void export_bias_tables(const BiasTables& tables, Checkpoint& out);
void import_bias_tables(const Checkpoint& ckpt, BiasTables& tables);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace volplan
