#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/corpus.h"

namespace triage {

// Ground truth for one generated note. `signal_span` is the phrase that
// makes a positive note positive.
struct OracleEntry {
  Label label = Label::kUnlabeled;
  std::string category;
  std::optional<std::string> signal_span;

  bool operator==(const OracleEntry&) const = default;
};

struct OracleKey {
  std::map<std::string, OracleEntry> entries;

  const OracleEntry* find(const std::string& id) const;
  bool operator==(const OracleKey&) const = default;
};

void to_json(nlohmann::json& j, const OracleKey& k);
void from_json(const nlohmann::json& j, OracleKey& k);
// The key is written owner-readable only.
void write_oracle_key(const std::filesystem::path& path, const OracleKey& key);
OracleKey read_oracle_key(const std::filesystem::path& path);

// Positive-note categories.
inline constexpr const char* kCatAefi = "aefi";
inline constexpr const char* kCatAefiOffList = "aefi_offlist";
// Negatives that carry a vaccine keyword.
inline constexpr const char* kCatStatus = "status";
inline constexpr const char* kCatHistory = "history";
inline constexpr const char* kCatAnimal = "animal";
inline constexpr const char* kCatVacuum = "vacuum";
inline constexpr const char* kCatSought = "sought";
// Negatives without one.
inline constexpr const char* kCatLookalike = "lookalike";
inline constexpr const char* kCatReaction = "reaction";
inline constexpr const char* kCatKeywordFree = "keyword_free";

struct PoolMix {
  double positive = 0.15;
  double keyword_negative = 0.25;
  // Share of keyword-free negatives drawn from the injection/shot lookalikes.
  double lookalike = 0.02;
  // Share of keyword-free negatives phrased like a reaction to a drug,
  // food or sting.
  double reaction = 0.0;
};

struct CorpusSpec {
  size_t n_focused = 2000;
  size_t n_deployment = 10000;
  PoolMix focused{0.15, 0.25, 0.02, 0.0};
  PoolMix deployment{0.06, 0.05, 0.02, 0.10};
  // Share of positives whose vaccine mention avoids the starter terms.
  double off_list_share = 0.2;
  // Mix of keyword-bearing negatives; normalised on use.
  std::map<std::string, double> confuser_shares = {
      {kCatStatus, 0.30}, {kCatHistory, 0.25}, {kCatAnimal, 0.10},
      {kCatVacuum, 0.15}, {kCatSought, 0.20}};
  uint64_t seed = 1;
  std::string template_pack = "ed-triage-v1";

  void validate() const;
};

void to_json(nlohmann::json& j, const CorpusSpec& s);
void from_json(const nlohmann::json& j, CorpusSpec& s);

struct SyntheticCorpus {
  std::vector<TriageRecord> focused;
  std::vector<TriageRecord> deployment;
  OracleKey key;
  // pool name -> category -> count
  std::map<std::string, std::map<std::string, size_t>> category_counts;
};

// Records carry raw text only; labels stay in the key.
SyntheticCorpus generate(const CorpusSpec& spec);

}  // namespace triage
