#include "triage/evaluate.h"

#include <cstdio>

#include "triage/error.h"

namespace triage {

std::map<std::string, Label> EvaluationSet::labels() const {
  std::map<std::string, Label> out;
  for (const auto& [id, e] : entries) out.emplace(id, e.label);
  return out;
}

std::vector<std::string> EvaluationSet::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& [id, e] : entries) out.push_back(id);
  return out;
}

void to_json(nlohmann::json& j, const EvaluationSet& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [id, e] : s.entries) {
    rows.push_back({{"id", id}, {"label", to_string(e.label)},
                    {"pool", to_string(e.pool)}, {"round", e.round}});
  }
  j = nlohmann::json{{"entries", rows},
                     {"positive_count", s.positive_count},
                     {"negative_count", s.negative_count}};
}

void from_json(const nlohmann::json& j, EvaluationSet& s) {
  s = EvaluationSet{};
  for (const auto& row : j.at("entries")) {
    EvaluationEntry e;
    e.id = row.at("id").get<std::string>();
    e.label = parse_label(row.at("label").get<std::string>());
    e.pool = parse_pool(row.at("pool").get<std::string>());
    e.round = row.at("round").get<int>();
    s.entries.emplace(e.id, e);
  }
  s.positive_count = j.at("positive_count").get<size_t>();
  s.negative_count = j.at("negative_count").get<size_t>();
}

void assert_disjoint(const EvaluationSet& set, const std::set<std::string>& dataset_ids) {
  for (const auto& [id, e] : set.entries) {
    if (dataset_ids.contains(id)) {
      fail(ErrorCode::kLeakageDetected, "evaluation record " + id + " is also in a dataset version");
    }
  }
}

EvaluationSet extend_evaluation_set(EvaluationSet set,
                                    std::span<const EvaluationEntry> additions,
                                    const std::set<std::string>& dataset_ids) {
  for (const auto& e : additions) {
    if (dataset_ids.contains(e.id)) {
      fail(ErrorCode::kLeakageDetected, "record " + e.id + " is already in a dataset version");
    }
    if (e.label == Label::kUnlabeled) {
      fail(ErrorCode::kInvalidArgument, "evaluation record " + e.id + " is unlabeled");
    }
    if (set.entries.contains(e.id)) continue;
    set.entries.emplace(e.id, e);
    if (e.label == Label::kPositive) {
      ++set.positive_count;
    } else {
      ++set.negative_count;
    }
  }
  assert_disjoint(set, dataset_ids);
  return set;
}

void to_json(nlohmann::json& j, const AuditItem& a) {
  j = nlohmann::json{{"id", a.id}, {"probability", a.probability}, {"text", a.text}};
}

void to_json(nlohmann::json& j, const AuditReport& r) {
  j = nlohmann::json{{"records", r.records},
                     {"predicted_positive", r.predicted_positive},
                     {"confirmed_positive", r.confirmed_positive},
                     {"false_positives", r.false_positives},
                     {"pattern_matched_negatives", r.pattern_matched_negatives}};
}

AuditReport audit_month(const Predictions& predictions,
                        std::span<const TriageRecord> records,
                        const FilterRuleSet& rules,
                        const std::function<Label(const TriageRecord&)>& oracle,
                        double cutoff) {
  AuditReport report;
  report.records = records.size();
  for (const auto& r : records) {
    const auto it = predictions.find(r.id);
    if (it == predictions.end()) {
      fail(ErrorCode::kDomainMismatch, "no prediction for " + r.id);
    }
    const double p = it->second;
    if (p >= cutoff) {
      ++report.predicted_positive;
      if (oracle(r) == Label::kPositive) {
        ++report.confirmed_positive;
      } else {
        report.false_positives.push_back({r.id, p, r.clean_text});
      }
    } else if (pattern_match(r, rules)) {
      report.pattern_matched_negatives.push_back({r.id, p, r.clean_text});
    }
  }
  return report;
}

void to_json(nlohmann::json& j, const ReportRow& r) {
  j = nlohmann::json{{"name", r.name}, {"confusion", r.cm}, {"metrics", r.metrics}};
  if (!r.checkpoint_id.empty()) j["checkpoint_id"] = r.checkpoint_id;
}

void from_json(const nlohmann::json& j, ReportRow& r) {
  r.name = j.at("name").get<std::string>();
  r.cm = j.at("confusion").get<ConfusionMatrix>();
  r.metrics = j.at("metrics").get<MetricReport>();
  r.checkpoint_id = j.value("checkpoint_id", std::string());
}

ReportRow make_row(std::string name, const ConfusionMatrix& cm, double beta,
                   std::string checkpoint_id) {
  return ReportRow{std::move(name), cm, metrics(cm, beta), std::move(checkpoint_id)};
}

std::string format_table(std::span<const ReportRow> rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %6s %6s %6s %6s %9s %7s %6s %7s\n", "Model", "TP",
                "TN", "FN", "FP", "Precision", "Recall", "F1", "F1Beta");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-22s %6llu %6llu %6llu %6llu %9.3f %7.3f %6.3f %7.3f\n",
                  r.name.c_str(), static_cast<unsigned long long>(r.cm.tp),
                  static_cast<unsigned long long>(r.cm.tn),
                  static_cast<unsigned long long>(r.cm.fn),
                  static_cast<unsigned long long>(r.cm.fp), r.metrics.precision,
                  r.metrics.recall, r.metrics.f1, r.metrics.fbeta);
    out += line;
  }
  return out;
}

}  // namespace triage
