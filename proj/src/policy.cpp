#include "udc/policy.hpp"

#include "udc/nnet/checkpoint.hpp"

namespace udc {

namespace {

nlohmann::json arch_json(ProblemKind kind, const AgnnConfig& a, const ConquerConfig& c) {
  return {{"kind", to_string(kind)},
          {"feature_layout_version", kFeatureLayoutVersion},
          {"agnn", to_json(a)},
          {"conquer", to_json(c)}};
}

}  // namespace

std::uint64_t policy_config_hash(const Policy& p) {
  return fnv1a(arch_json(p.kind(), p.divide.config(), p.conquer.config()).dump());
}

void save_policy(const std::string& path, const Policy& p, const nlohmann::json& extra) {
  nn::Checkpoint ckpt;
  ckpt.config_hash = policy_config_hash(p);
  ckpt.header = arch_json(p.kind(), p.divide.config(), p.conquer.config());
  ckpt.header["bn_momentum"] = nn::kBnMomentum;
  for (const auto& [k, v] : extra.items()) ckpt.header[k] = v;
  nn::store_to_checkpoint(ckpt, "div/", p.divide.store());
  nn::store_to_checkpoint(ckpt, "conq/", p.conquer.store());
  nn::write_checkpoint(path, ckpt);
}

Policy load_policy(const std::string& path, nlohmann::json* header) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  const auto& h = ckpt.header;
  if (h.value("feature_layout_version", -1) != kFeatureLayoutVersion) {
    throw Error("checkpoint_mismatch", "feature layout version differs from this build");
  }
  const ProblemKind kind = parse_kind(h.at("kind").get<std::string>());
  Policy p(kind, agnn_config_from_json(h.at("agnn")), conquer_config_from_json(h.at("conquer")), 0);
  if (policy_config_hash(p) != ckpt.config_hash) {
    throw Error("checkpoint_mismatch", "config hash does not match the header");
  }
  nn::store_from_checkpoint(ckpt, "div/", p.divide.store());
  nn::store_from_checkpoint(ckpt, "conq/", p.conquer.store());
  if (header != nullptr) *header = h;
  return p;
}

}  // namespace udc
