#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtae/config_file.hpp"
#include "mtae/model.hpp"
#include "mtae/train.hpp"

namespace mtae {

struct NamedTensor {
  std::string name;
  Tensor value;

  bool operator==(const NamedTensor&) const = default;
};

/// Everything needed to resume training or to sample: configs, parameters
/// in model order, Adam moments (empty when not saved) and the step count.
struct Checkpoint {
  RunConfig config;
  std::int64_t steps = 0;
  std::vector<NamedTensor> params;
  std::vector<Tensor> adam_m, adam_v;

  bool operator==(const Checkpoint&) const = default;
};

Checkpoint snapshot(const Trainer& trainer);
Checkpoint snapshot(const TransformerAutoencoder& model, const TrainConfig& train = {});

/// Builds a model from the stored config and copies the stored parameters
/// in. Throws a state error if names or shapes disagree.
TransformerAutoencoder load_model(const Checkpoint& ckpt);
/// Overwrites the trainer's parameters, Adam state and step counter.
void restore(Trainer& trainer, const Checkpoint& ckpt);

/// Binary format: magic, version, config text, steps, tensors. Doubles are
/// stored as their IEEE bit patterns, little-endian.
std::string serialize(const Checkpoint& ckpt);
Checkpoint deserialize(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mtae
