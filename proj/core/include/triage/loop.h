#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/corpus.h"
#include "triage/evaluate.h"
#include "triage/metrics.h"
#include "triage/sampler.h"

namespace triage {

enum class Split { kTrain, kValidation };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

// A labeled record waiting to enter a dataset. Among train negatives the
// highest priority is admitted first when the ratio cap binds.
struct Candidate {
  std::string id;
  Label label = Label::kUnlabeled;
  Split split = Split::kTrain;
  double priority = 0.0;
  bool synthetic = false;

  bool operator==(const Candidate&) const = default;
};

void to_json(nlohmann::json& j, const Candidate& c);
void from_json(const nlohmann::json& j, Candidate& c);

struct SplitCounts {
  size_t positive = 0;
  size_t negative = 0;
  size_t synthetic = 0;

  size_t total() const { return positive + negative; }
  double synthetic_fraction() const {
    return total() == 0 ? 0.0 : static_cast<double>(synthetic) / static_cast<double>(total());
  }
  bool operator==(const SplitCounts&) const = default;
};

struct LabeledDataset {
  int version = 0;
  std::optional<int> parent_version;
  std::map<std::string, Label> train;
  std::map<std::string, Label> validation;
  std::set<std::string> synthetic_ids;
  // Negatives deferred by the ratio cap, in admission order.
  std::vector<Candidate> holdover;

  SplitCounts train_counts() const;
  SplitCounts validation_counts() const;
  std::set<std::string> all_ids() const;
  // kInvariantViolation if the splits overlap or train breaks the cap.
  void check_invariants(double ratio_cap) const;

  bool operator==(const LabeledDataset&) const = default;
};

void to_json(nlohmann::json& j, const LabeledDataset& d);
void from_json(const nlohmann::json& j, LabeledDataset& d);

// First dataset version, from the labeled seed batch.
LabeledDataset make_seed_dataset(std::span<const Candidate> candidates);

// Next version: every positive and every validation candidate is admitted;
// train negatives (new candidates plus the previous holdover) are admitted
// by priority until negatives would exceed ratio_cap x positives, and the
// remainder is held over. kRatioUnreachable when train has no positives.
LabeledDataset expand_dataset(const LabeledDataset& current,
                              std::span<const Candidate> candidates, double ratio_cap = 1.5);

enum class Phase { kTraining, kCheckpointEval, kPoolPredict, kQueueBuild, kLabeling, kExpand, kComplete };
std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);
// Only single forward steps are legal.
bool can_transition(Phase from, Phase to);
Phase next_phase(Phase p);

enum class TrainMode { kFromScratch, kResumeBest };
std::string_view to_string(TrainMode m);
TrainMode parse_mode(std::string_view s);

struct Lineage {
  TrainMode mode = TrainMode::kFromScratch;
  std::optional<std::string> parent_checkpoint;
  std::vector<std::string> checkpoint_ids;
  std::vector<std::string> selected_ids;
  bool trained = false;

  bool operator==(const Lineage&) const = default;
};

struct RoundState {
  int round = 0;
  Phase phase = Phase::kTraining;
  int dataset_version = 0;
  std::vector<Lineage> lineages;
  std::vector<std::string> batch_ids;
  std::optional<std::string> representative;
  std::optional<int> next_dataset_version;
  std::optional<ReportRow> report;

  // Selected checkpoints of every lineage, lineage order.
  std::vector<std::string> selected_checkpoints() const;
  std::vector<std::string> checkpoint_ids() const;
  bool trained() const;

  bool operator==(const RoundState&) const = default;
};

void to_json(nlohmann::json& j, const Lineage& l);
void from_json(const nlohmann::json& j, Lineage& l);
void to_json(nlohmann::json& j, const RoundState& r);
void from_json(const nlohmann::json& j, RoundState& r);

}  // namespace triage
