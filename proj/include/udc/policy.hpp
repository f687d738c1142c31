#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "udc/conquer.hpp"
#include "udc/divide.hpp"

namespace udc {

/// Dividing and conquering models for one problem kind.
struct Policy {
  Policy(ProblemKind kind, AgnnConfig agnn, ConquerConfig conq, std::uint64_t seed)
      : divide(kind, agnn, seed), conquer(kind, conq, seed) {}

  ProblemKind kind() const { return divide.kind(); }

  DividingModel divide;
  ConquerModel conquer;
};

/// Hash of the architecture (kind, feature layout, layer shapes).
std::uint64_t policy_config_hash(const Policy& p);

/// Writes "div/" and "conq/" tensors plus optimizer state; `extra` is merged
/// into the header.
void save_policy(const std::string& path, const Policy& p,
                 const nlohmann::json& extra = nlohmann::json::object());
Policy load_policy(const std::string& path, nlohmann::json* header = nullptr);

}  // namespace udc
