#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/augment.h"
#include "triage/classifier.h"
#include "triage/config.h"
#include "triage/corpus.h"
#include "triage/evaluate.h"
#include "triage/loop.h"
#include "triage/oracle.h"
#include "triage/sampler.h"
#include "triage/topics.h"

namespace triage {

inline constexpr double kReportBeta = 1.3;

struct LabelVote {
  std::string oracle_id;
  OracleKind kind = OracleKind::kHuman;
  Label label = Label::kUnlabeled;
  bool adjudication = false;
  std::string event_id;
  std::string at;

  bool operator==(const LabelVote&) const = default;
};

struct LabelState {
  std::vector<LabelVote> votes;
  std::optional<Label> final_label;
  bool conflict = false;

  const LabelVote* vote_of(const std::string& oracle_id) const;
  bool operator==(const LabelState&) const = default;
};

struct PredictionRef {
  int round = 0;
  std::string checkpoint_id;
  Pool pool = Pool::kFocused;
  std::string path;
  size_t count = 0;
  std::string digest;

  bool operator==(const PredictionRef&) const = default;
};

void to_json(nlohmann::json& j, const PredictionRef& p);
void from_json(const nlohmann::json& j, PredictionRef& p);

// Everything the event log determines. Built only by apply_event.
struct ProjectState {
  uint64_t seq = 0;
  size_t labels_required = 1;
  nlohmann::json corpus;
  nlohmann::json topics;
  std::map<std::string, QueryBatch> batches;
  std::map<std::string, std::string> batch_of;  // record id -> batch id
  std::map<std::string, LabelState> labels;
  std::map<int, LabeledDataset> datasets;
  std::vector<RoundState> rounds;
  EvaluationSet evaluation;
  CounterfactualLedger ledger;
  std::map<std::string, TriageRecord> synthetic;
  std::map<std::string, nlohmann::json> checkpoints;
  std::vector<PredictionRef> predictions;

  std::optional<Label> final_label(const std::string& id) const;
  int latest_dataset_version() const;
  const LabeledDataset* latest_dataset() const;
  // Union of train and validation ids over every version.
  std::set<std::string> dataset_ids() const;
  std::set<std::string> holdover_ids() const;
  RoundState* current_round();
  const RoundState* current_round() const;
  // True when `batch_id` currently accepts labels.
  bool batch_open(const std::string& batch_id) const;
};

nlohmann::json state_to_json(const ProjectState& s);

// Applies one event; throws before mutating when the event is invalid.
void apply_event(ProjectState& state, const nlohmann::json& event);
ProjectState replay(std::span<const nlohmann::json> events);

struct LabelAck {
  std::string event_id;
  // "final", "pending", "conflict" or "duplicate"
  std::string status;
  std::optional<Label> final_label;
};

void to_json(nlohmann::json& j, const LabelAck& a);

struct QueueItem {
  TriageRecord record;
  std::string batch_id;
  Strategy strategy = Strategy::kDiversitySeed;
  double score = 0.0;
  bool pattern_match = false;
  std::vector<std::pair<size_t, size_t>> include_matches;
  std::optional<size_t> topic;
  std::vector<std::string> topic_keywords;
};

void to_json(nlohmann::json& j, const QueueItem& q);

// Exclusive advisory lock on a project directory, held for the object's
// lifetime. kIo if another process holds it.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

// The persistent store of one active-learning project. Every mutation is
// an event appended to events.jsonl; state is the fold of that log.
// Methods are safe to call from several threads.
class Project {
 public:
  // kIo if `config.project_dir` already holds an event log.
  static std::unique_ptr<Project> create(const ProjectConfig& config);
  static std::unique_ptr<Project> open(const std::filesystem::path& dir);

  Project(const Project&) = delete;
  Project& operator=(const Project&) = delete;

  // Preprocesses both pools, keyword-filters the focused pool and stores them.
  void load_corpus(std::span<const TriageRecord> focused, std::span<const TriageRecord> deployment);
  // Clusters the focused pool; `probe` answers for up to probe_per_topic
  // members of every topic.
  void build_topics(const std::function<bool(const TriageRecord&)>& probe);
  QueryBatch create_seed_batch();
  const LabeledDataset& create_seed_dataset();

  LabelAck submit_label(const std::string& record_id, Label label, const OracleIdentity& oracle,
                        bool adjudicate = false);

  // Starts the next round; the first mode must train from scratch or
  // resume from the previous round's representative checkpoint.
  int start_round(const std::vector<TrainMode>& modes);
  // Trains every pending lineage of `round`. Heavy work runs unlocked.
  void run_training(int round);
  // Does the work that closes the current phase and moves to the next.
  RoundState advance(int round);

  FlipResult author_counterfactual(const std::string& source_id, FlipDirection direction,
                                   const std::string& span, std::optional<size_t> position,
                                   const OracleIdentity& oracle);

  std::optional<QueueItem> queue_next(std::optional<Strategy> strategy,
                                      const std::string& oracle_id) const;
  // Every record still waiting for labels in the open batches.
  std::vector<std::string> pending_records() const;
  std::vector<std::string> conflicts() const;

  std::optional<TriageRecord> find_record(const std::string& id) const;
  nlohmann::json record_view(const std::string& id) const;
  // Scores round `round`'s representative on the current evaluation set.
  ReportRow round_metrics(int round, double beta) const;
  ReportRow baseline_metrics(double beta) const;
  std::vector<ReportRow> report_rows(double beta) const;
  nlohmann::json final_report(double beta) const;
  nlohmann::json dataset_table() const;

  Checkpoint load_checkpoint(const std::string& id) const;
  Predictions predict(const Checkpoint& checkpoint, std::span<const TriageRecord> records) const;

  ProjectState state() const;
  nlohmann::json state_json() const;
  const ProjectConfig& config() const { return config_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::vector<nlohmann::json> events() const;
  std::optional<TopicModel> topic_model() const;
  std::vector<TriageRecord> pool_records(Pool pool) const;

 private:
  Project(ProjectConfig config, std::filesystem::path dir);

  nlohmann::json commit(const std::string& type, nlohmann::json payload);
  std::string clock(uint64_t seq) const;
  void load_pools();
  void write_snapshot();
  const TriageRecord& record(const std::string& id) const;
  std::vector<TriageRecord> records_for(std::span<const std::string> ids) const;
  ConfusionMatrix score_on_evaluation(const Checkpoint& checkpoint) const;
  ReportRow round_row(const RoundState& round, const std::string& checkpoint_id, std::string name,
                      double beta) const;

  nlohmann::json select_for_eval(const RoundState& round) const;
  nlohmann::json run_pool_predictions(const RoundState& round);
  nlohmann::json build_queues(const RoundState& round) const;
  nlohmann::json route_evaluation(const RoundState& round) const;
  nlohmann::json expansion(const RoundState& round) const;

  ProjectConfig config_;
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  ProjectState state_;
  std::ofstream log_;
  std::shared_ptr<const Embedder> embedder_;
  std::unique_ptr<ClassifierBackend> backend_;
  std::map<std::string, TriageRecord> records_;
  std::optional<TopicModel> topics_;
};

}  // namespace triage
