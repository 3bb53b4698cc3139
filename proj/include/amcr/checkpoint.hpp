#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "amcr/model.hpp"
#include "amcr/tensor.hpp"

// Parameter checkpoints: magic "AMCP", version u16, length-prefixed JSON
// header listing (name, shape, offset) per tensor plus free-form meta, then
// raw little-endian f32 payloads in header order.

namespace amcr {

struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  nlohmann::ordered_json meta;

  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);

// The network's config travels in meta["model"].
Checkpoint checkpoint_from_network(const Network& net, nlohmann::ordered_json meta);
Network network_from_checkpoint(const Checkpoint& ckpt);

}  // namespace amcr
