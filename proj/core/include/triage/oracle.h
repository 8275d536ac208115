#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "triage/corpus.h"
#include "triage/synth.h"

namespace triage {

enum class OracleKind { kHuman, kSimulated };
std::string_view to_string(OracleKind k);
OracleKind parse_oracle_kind(std::string_view s);

// Who stands behind a label. Adjudicators settle conflicting votes.
struct OracleIdentity {
  std::string id;
  OracleKind kind = OracleKind::kHuman;
  bool adjudicator = false;

  bool operator==(const OracleIdentity&) const = default;
};

void to_json(nlohmann::json& j, const OracleIdentity& o);
void from_json(const nlohmann::json& j, OracleIdentity& o);

// Answers from the sealed key, flipping a deterministic `noise_rate` share
// of answers.
class SimulatedOracle {
 public:
  SimulatedOracle(OracleKey key, double noise_rate, uint64_t seed,
                  std::string id = "simulated");

  // kUnknownRecord for ids outside the key.
  Label label(const std::string& record_id) const;
  std::optional<std::string> signal_span(const std::string& record_id) const;
  const OracleEntry& entry(const std::string& record_id) const;
  const OracleKey& key() const { return key_; }
  OracleIdentity identity() const { return {id_, OracleKind::kSimulated, false}; }

 private:
  OracleKey key_;
  double noise_rate_;
  uint64_t seed_;
  std::string id_;
};

}  // namespace triage
