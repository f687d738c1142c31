#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "udc/problems.hpp"

namespace udc {

/// Instance JSON: {kind, n, coords?, demands?, capacity?, prizes?, penalties?,
/// budget?, values?, weights?, edges?}. Reals are written with 9 significant
/// digits.
nlohmann::json instance_to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& j);

nlohmann::json solution_to_json(const Solution& sol);
Solution solution_from_json(const nlohmann::json& j);

/// Rounds to 9 significant decimal digits.
double round9(double v);

/// Writes a JSON array of instances.
void save_instances(const std::string& path, const std::vector<Instance>& instances);
/// Accepts a single instance object or an array.
std::vector<Instance> load_instances(const std::string& path);

}  // namespace udc
