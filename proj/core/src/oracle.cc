#include "triage/oracle.h"

#include "triage/error.h"
#include "triage/rng.h"

namespace triage {

std::string_view to_string(OracleKind k) {
  return k == OracleKind::kHuman ? "human" : "simulated";
}

OracleKind parse_oracle_kind(std::string_view s) {
  if (s == "human") return OracleKind::kHuman;
  if (s == "simulated") return OracleKind::kSimulated;
  fail(ErrorCode::kInvalidArgument, "unknown oracle kind '" + std::string(s) + "'");
}

void to_json(nlohmann::json& j, const OracleIdentity& o) {
  j = nlohmann::json{{"id", o.id}, {"kind", to_string(o.kind)}, {"adjudicator", o.adjudicator}};
}

void from_json(const nlohmann::json& j, OracleIdentity& o) {
  o.id = j.at("id").get<std::string>();
  o.kind = parse_oracle_kind(j.value("kind", std::string("human")));
  o.adjudicator = j.value("adjudicator", false);
}

SimulatedOracle::SimulatedOracle(OracleKey key, double noise_rate, uint64_t seed, std::string id)
    : key_(std::move(key)), noise_rate_(noise_rate), seed_(seed), id_(std::move(id)) {
  if (noise_rate_ < 0.0 || noise_rate_ > 1.0) {
    fail(ErrorCode::kConfig, "oracle noise_rate must lie in [0,1]");
  }
}

const OracleEntry& SimulatedOracle::entry(const std::string& record_id) const {
  const auto* e = key_.find(record_id);
  if (e == nullptr) fail(ErrorCode::kUnknownRecord, "oracle has no answer for " + record_id);
  return *e;
}

Label SimulatedOracle::label(const std::string& record_id) const {
  const Label truth = entry(record_id).label;
  if (noise_rate_ > 0.0 && hash_fraction_below(record_id, seed_, noise_rate_)) return flip(truth);
  return truth;
}

std::optional<std::string> SimulatedOracle::signal_span(const std::string& record_id) const {
  return entry(record_id).signal_span;
}

}  // namespace triage
