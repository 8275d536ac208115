#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/classifier.h"
#include "triage/corpus.h"
#include "triage/embed.h"
#include "triage/oracle.h"
#include "triage/sampler.h"
#include "triage/synth.h"

namespace triage {

struct CorpusConfig {
  // "synthetic" generates from `synth`; "files" reads the two jsonl pools.
  std::string kind = "synthetic";
  std::optional<std::filesystem::path> focused;
  std::optional<std::filesystem::path> deployment;
  std::optional<std::filesystem::path> oracle_key;
  CorpusSpec synth;
  std::vector<std::string> strip_patterns;
};

struct TopicConfig {
  size_t k = 30;
  std::optional<size_t> reduce_to = 29;
  size_t top_n = 10;
  size_t probe_per_topic = 10;
  double flag_threshold = 0.5;
  uint64_t seed = 0;
};

struct LoopConfig {
  int rounds = 4;
  size_t top_k = 2;
  double ratio_cap = 1.5;
  double uncertainty_threshold = 0.9;
  double validation_share = 0.2;
  // Per-round share of new labels routed to validation (missing = 0).
  std::vector<double> validation_additions = {0.15, 0.15, 0.0, 0.0};
  double eval_share = 0.5;
  int eval_from_round = 1;
  std::vector<int> resume_rounds = {4};
  // Deployment records newly exposed to pool prediction each round, taken
  // in a fixed hash order and accumulated. Empty exposes the whole pool.
  std::vector<size_t> deployment_per_round;
  // Counterfactuals authored by the scripted oracle per round.
  std::vector<size_t> counterfactual_negatives;
  std::vector<size_t> counterfactual_positives;
  size_t labels_required = 1;
  // Stop early once a round yields fewer new false positives than this.
  std::optional<size_t> stop_new_fp_below;
  uint64_t seed = 0;

  double validation_addition(int round) const;
  size_t counterfactual_negative_count(int round) const;
  size_t counterfactual_positive_count(int round) const;
  // nullopt when the whole deployment pool is exposed.
  std::optional<size_t> deployment_exposure(int round) const;
};

struct OracleConfig {
  std::string kind = "simulated";
  std::string id = "simulated";
  double noise_rate = 0.0;
  uint64_t seed = 0;
};

struct BackendConfig {
  std::string kind = "native";
  std::optional<std::string> endpoint;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  // bearer token -> oracle identity
  std::map<std::string, OracleIdentity> tokens;
};

struct ProjectConfig {
  std::string name = "project";
  std::filesystem::path project_dir = "project";
  uint64_t seed = 0;
  std::string clock_origin = "2024-01-01T00:00:00Z";
  CorpusConfig corpus;
  FilterRuleSet rules = FilterRuleSet::starter();
  EmbedderSpec embedder;
  TopicConfig topics;
  QuotaPlan quota;
  TrainConfig train;
  LoopConfig loop;
  OracleConfig oracle;
  BackendConfig backend;
  ServiceConfig service;

  void validate() const;
};

// Relative paths resolve against `base_dir`. kConfig on malformed input.
ProjectConfig parse_config(std::string_view toml_text,
                           const std::filesystem::path& base_dir = {});
ProjectConfig load_config(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const ProjectConfig& c);
void from_json(const nlohmann::json& j, ProjectConfig& c);

}  // namespace triage
