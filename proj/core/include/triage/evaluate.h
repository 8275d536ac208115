#pragma once

#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/corpus.h"
#include "triage/metrics.h"
#include "triage/sampler.h"

namespace triage {

struct EvaluationEntry {
  std::string id;
  Label label = Label::kUnlabeled;
  Pool pool = Pool::kDeployment;
  int round = 0;

  bool operator==(const EvaluationEntry&) const = default;
};

// The accumulated, human-labeled test set. Never shares an id with any
// training or validation dataset version.
struct EvaluationSet {
  std::map<std::string, EvaluationEntry> entries;
  size_t positive_count = 0;
  size_t negative_count = 0;

  bool contains(const std::string& id) const { return entries.contains(id); }
  size_t size() const { return entries.size(); }
  std::map<std::string, Label> labels() const;
  std::vector<std::string> ids() const;

  bool operator==(const EvaluationSet&) const = default;
};

void to_json(nlohmann::json& j, const EvaluationSet& s);
void from_json(const nlohmann::json& j, EvaluationSet& s);

// kLeakageDetected if any evaluation id is in `dataset_ids`.
void assert_disjoint(const EvaluationSet& set, const std::set<std::string>& dataset_ids);

// Merges labeled entries; ids already present are left untouched.
EvaluationSet extend_evaluation_set(EvaluationSet set,
                                    std::span<const EvaluationEntry> additions,
                                    const std::set<std::string>& dataset_ids);

struct AuditItem {
  std::string id;
  double probability = 0.0;
  std::string text;
};

void to_json(nlohmann::json& j, const AuditItem& a);

struct AuditReport {
  size_t records = 0;
  size_t predicted_positive = 0;
  size_t confirmed_positive = 0;
  std::vector<AuditItem> false_positives;
  // Model negatives the keyword rules hit, queued for false-negative review.
  std::vector<AuditItem> pattern_matched_negatives;
};

void to_json(nlohmann::json& j, const AuditReport& r);

// Error analysis over one deployment slice: every positive prediction is
// put to `oracle`; negatives the rules match are listed for review.
AuditReport audit_month(const Predictions& predictions,
                        std::span<const TriageRecord> records,
                        const FilterRuleSet& rules,
                        const std::function<Label(const TriageRecord&)>& oracle,
                        double cutoff = 0.5);

struct ReportRow {
  std::string name;
  ConfusionMatrix cm;
  MetricReport metrics;
  std::string checkpoint_id;

  bool operator==(const ReportRow&) const = default;
};

void to_json(nlohmann::json& j, const ReportRow& r);
void from_json(const nlohmann::json& j, ReportRow& r);

ReportRow make_row(std::string name, const ConfusionMatrix& cm, double beta,
                   std::string checkpoint_id = {});

// Fixed-width table: Model TP TN FN FP Precision Recall F1 F1Beta.
std::string format_table(std::span<const ReportRow> rows);

}  // namespace triage
