#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/config.h"
#include "triage/evaluate.h"
#include "triage/project.h"

namespace triage {

struct RoundCheck {
  int round = 0;
  int dataset_version = 0;
  SplitCounts train;
  SplitCounts validation;
  size_t evaluation_size = 0;
  size_t new_false_positives = 0;
  bool ratio_ok = false;
  bool disjoint = false;
};

void to_json(nlohmann::json& j, const RoundCheck& c);

struct PipelineResult {
  std::filesystem::path dir;
  std::vector<RoundCheck> rounds;
  std::vector<ReportRow> rows;
  nlohmann::json report;
  bool replay_identical = false;
  bool stopped_early = false;
  std::vector<std::string> violations;
  double seconds = 0.0;
};

// Writes the configured corpus under `dir`/corpus and returns the pools
// plus the answer key the simulated oracle reads.
SyntheticCorpus materialize_corpus(const ProjectConfig& config, const std::filesystem::path& dir);

// Scripted run: seed stage, then every round end to end with the
// simulated oracle answering queues and authoring counterfactuals.
PipelineResult run_pipeline(const ProjectConfig& config, std::ostream* log = nullptr);

// Labels every pending record in the open batches.
size_t label_pending(Project& project, const SimulatedOracle& oracle);

// Authors this round's counterfactual quota from train-split sources.
size_t author_scripted_counterfactuals(Project& project, const SimulatedOracle& oracle, int round);

}  // namespace triage
