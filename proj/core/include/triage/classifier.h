#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/corpus.h"
#include "triage/embed.h"
#include "triage/sampler.h"

namespace triage {

struct TrainConfig {
  size_t epochs = 9;
  size_t batch_size = 16;
  size_t checkpoint_every = 10;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  uint64_t seed = 0;

  // `allow_zero_epochs` is for resumption, where zero epochs means "no steps".
  void validate(size_t train_size, bool allow_zero_epochs = false) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

inline constexpr int kCheckpointSchemaVersion = 1;

// Weights hold dim coefficients followed by the bias. External backends
// leave `weights` empty and are addressed by id.
struct Checkpoint {
  std::string id;
  int round = 0;
  size_t step = 0;
  std::vector<double> weights;
  double val_loss = 0.0;
  double val_auc = 0.0;
  double val_f1 = 0.0;
  std::optional<std::string> parent_id;
  int dataset_version = 0;
  std::string lineage = "from_scratch";
  std::string backend = "native";

  bool operator==(const Checkpoint&) const = default;
};

void to_json(nlohmann::json& j, const Checkpoint& c);
void from_json(const nlohmann::json& j, Checkpoint& c);
// Metadata only (no weights), as recorded in the event log.
nlohmann::json checkpoint_summary(const Checkpoint& c);

// Dense design matrix for the native backend; labels are 0/1.
struct Examples {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> features;
  std::vector<int> labels;

  size_t size() const { return ids.size(); }
};

Examples make_examples(std::span<const std::string> ids,
                       std::span<const std::string> texts,
                       std::span<const int> labels, const Embedder& embedder);

struct TrainContext {
  int round = 0;
  int dataset_version = 0;
  std::string lineage = "from_scratch";
  std::string id_prefix = "ckpt";
};

// Mean logistic loss plus (l2/2)|w|^2 over the non-bias coefficients.
double objective(std::span<const double> weights, const Examples& data, double l2);
std::vector<double> objective_gradient(std::span<const double> weights,
                                       const Examples& data, double l2);
// Mean logistic loss without the penalty.
double log_loss(std::span<const double> weights, const Examples& data);

double sigmoid(double z);
double predict_probability(std::span<const double> weights, std::span<const double> x);

// Mini-batch gradient descent from zero weights; one checkpoint every
// checkpoint_every steps, scored on `validation`.
std::vector<Checkpoint> train(const Examples& train_set, const Examples& validation,
                              const TrainConfig& config, const TrainContext& context);

// As train, initialised from `from`; provenance points at from.id.
std::vector<Checkpoint> resume_train(const Checkpoint& from, const Examples& train_set,
                                     const Examples& validation, const TrainConfig& config,
                                     const TrainContext& context);

Predictions predict(const Checkpoint& checkpoint, std::span<const TriageRecord> records,
                    const Embedder& embedder);
Predictions predict_examples(const Checkpoint& checkpoint, const Examples& data);

// Ranked by val_f1 desc, val_auc desc, val_loss asc, step asc.
std::vector<Checkpoint> select_checkpoints(std::span<const Checkpoint> checkpoints,
                                           size_t top_k);
bool checkpoint_precedes(const Checkpoint& a, const Checkpoint& b);

// A training request in text form, as handed to a backend.
struct TrainingJob {
  std::vector<std::string> train_ids;
  std::vector<std::string> train_texts;
  std::vector<int> train_labels;
  std::vector<std::string> validation_ids;
  std::vector<std::string> validation_texts;
  std::vector<int> validation_labels;
  TrainConfig config;
  TrainContext context;
  std::optional<Checkpoint> init;
};

class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual std::vector<Checkpoint> train(const TrainingJob& job) = 0;
  virtual Predictions predict(const Checkpoint& checkpoint,
                              std::span<const TriageRecord> records) = 0;
};

// Linear model over embedder features.
class NativeBackend final : public ClassifierBackend {
 public:
  explicit NativeBackend(std::shared_ptr<const Embedder> embedder)
      : embedder_(std::move(embedder)) {}
  std::vector<Checkpoint> train(const TrainingJob& job) override;
  Predictions predict(const Checkpoint& checkpoint,
                      std::span<const TriageRecord> records) override;

 private:
  std::shared_ptr<const Embedder> embedder_;
};

// Remote trainer: POST /train -> {job_id}; GET /jobs/{id} -> {status,
// checkpoints}; POST /predict {checkpoint_id, texts} -> {probabilities}.
class ExternalBackend final : public ClassifierBackend {
 public:
  explicit ExternalBackend(std::string endpoint, int poll_ms = 200, int timeout_s = 600)
      : endpoint_(std::move(endpoint)), poll_ms_(poll_ms), timeout_s_(timeout_s) {}
  std::vector<Checkpoint> train(const TrainingJob& job) override;
  Predictions predict(const Checkpoint& checkpoint,
                      std::span<const TriageRecord> records) override;

 private:
  std::string endpoint_;
  int poll_ms_;
  int timeout_s_;
};

}  // namespace triage
