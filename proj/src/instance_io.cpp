#include "udc/instance_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace udc {

using nlohmann::json;

double round9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

namespace {

json reals(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(round9(x));
  return arr;
}

std::vector<double> read_reals(const json& j, const char* key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  for (const auto& x : j.at(key)) out.push_back(x.get<double>());
  return out;
}

}  // namespace

json instance_to_json(const Instance& inst) {
  json j;
  j["kind"] = to_string(inst.kind);
  j["n"] = inst.n;
  if (!inst.name.empty()) j["name"] = inst.name;
  if (inst.scale != 1) j["scale"] = round9(inst.scale);
  if (!inst.coords.empty()) {
    json c = json::array();
    for (const Point& p : inst.coords) c.push_back({round9(p.x), round9(p.y)});
    j["coords"] = std::move(c);
  }
  if (!inst.demands.empty()) j["demands"] = reals(inst.demands);
  if (inst.kind == ProblemKind::kCvrp || inst.kind == ProblemKind::kKp) {
    j["capacity"] = round9(inst.capacity);
  }
  if (!inst.prizes.empty()) j["prizes"] = reals(inst.prizes);
  if (!inst.penalties.empty()) j["penalties"] = reals(inst.penalties);
  if (inst.kind == ProblemKind::kOp) j["budget"] = round9(inst.budget);
  if (!inst.values.empty()) j["values"] = reals(inst.values);
  if (!inst.weights.empty()) j["weights"] = reals(inst.weights);
  if (inst.kind == ProblemKind::kMis) {
    json e = json::array();
    for (auto [u, v] : inst.edges) e.push_back({u, v});
    j["edges"] = std::move(e);
  }
  return j;
}

Instance instance_from_json(const json& j) {
  Instance inst;
  try {
    inst.kind = parse_kind(j.at("kind").get<std::string>());
    inst.n = j.at("n").get<int>();
    inst.name = j.value("name", std::string());
    inst.scale = j.value("scale", 1.0);
    if (j.contains("coords")) {
      for (const auto& p : j.at("coords")) inst.coords.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    inst.demands = read_reals(j, "demands");
    inst.capacity = j.value("capacity", 0.0);
    inst.prizes = read_reals(j, "prizes");
    inst.penalties = read_reals(j, "penalties");
    inst.budget = j.value("budget", 0.0);
    inst.values = read_reals(j, "values");
    inst.weights = read_reals(j, "weights");
    if (j.contains("edges")) {
      for (const auto& e : j.at("edges")) {
        int u = e.at(0).get<int>();
        int v = e.at(1).get<int>();
        if (u > v) std::swap(u, v);
        inst.edges.emplace_back(u, v);
      }
    }
  } catch (const json::exception& ex) {
    throw Error("parse_error", std::string("instance JSON: ") + ex.what());
  }
  if (inst.kind == ProblemKind::kMis) build_adjacency(inst);
  validate_instance(inst);
  return inst;
}

json solution_to_json(const Solution& sol) {
  json j;
  if (!sol.order.empty()) j["order"] = sol.order;
  if (!sol.flags.empty()) {
    std::vector<int> f(sol.flags.begin(), sol.flags.end());
    j["flags"] = f;
  }
  if (sol.order.empty()) j["subset"] = sol.subset;
  j["objective"] = sol.objective;
  j["feasible"] = sol.feasible;
  return j;
}

Solution solution_from_json(const json& j) {
  Solution sol;
  if (j.contains("order")) sol.order = j.at("order").get<std::vector<int>>();
  if (j.contains("flags")) {
    for (int f : j.at("flags").get<std::vector<int>>()) sol.flags.push_back(static_cast<std::uint8_t>(f != 0));
  }
  if (j.contains("subset")) sol.subset = j.at("subset").get<std::vector<int>>();
  sol.objective = j.value("objective", 0.0);
  sol.feasible = j.value("feasible", false);
  return sol;
}

void save_instances(const std::string& path, const std::vector<Instance>& instances) {
  json arr = json::array();
  for (const Instance& inst : instances) arr.push_back(instance_to_json(inst));
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path);
  out << arr.dump() << '\n';
}

std::vector<Instance> load_instances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw Error("parse_error", path + ": " + ex.what());
  }
  std::vector<Instance> out;
  if (j.is_array()) {
    for (const auto& item : j) out.push_back(instance_from_json(item));
  } else {
    out.push_back(instance_from_json(j));
  }
  return out;
}

}  // namespace udc
