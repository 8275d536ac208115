#include "triage/metrics.h"

#include <algorithm>
#include <numeric>
#include <vector>

#include "triage/error.h"

namespace triage {

void to_json(nlohmann::json& j, const ConfusionMatrix& cm) {
  j = nlohmann::json{{"tp", cm.tp}, {"tn", cm.tn}, {"fn", cm.fn}, {"fp", cm.fp}};
}

void from_json(const nlohmann::json& j, ConfusionMatrix& cm) {
  cm.tp = j.at("tp").get<uint64_t>();
  cm.tn = j.at("tn").get<uint64_t>();
  cm.fn = j.at("fn").get<uint64_t>();
  cm.fp = j.at("fp").get<uint64_t>();
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"precision", r.precision},
                     {"recall", r.recall},
                     {"f1", r.f1},
                     {"fbeta", r.fbeta},
                     {"beta", r.beta},
                     {"auc", r.auc ? nlohmann::json(*r.auc) : nlohmann::json()},
                     {"precision_undefined", r.precision_undefined},
                     {"recall_undefined", r.recall_undefined}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.fbeta = j.at("fbeta").get<double>();
  r.beta = j.at("beta").get<double>();
  r.auc = j.contains("auc") && !j["auc"].is_null() ? std::optional<double>(j["auc"].get<double>())
                                                   : std::nullopt;
  r.precision_undefined = j.value("precision_undefined", false);
  r.recall_undefined = j.value("recall_undefined", false);
}

ConfusionMatrix confusion(const std::map<std::string, Label>& labels,
                          const std::map<std::string, double>& predictions, double cutoff) {
  if (labels.size() != predictions.size()) {
    fail(ErrorCode::kDomainMismatch, "confusion: label and prediction domains differ in size");
  }
  ConfusionMatrix cm;
  auto p = predictions.begin();
  for (const auto& [id, label] : labels) {
    if (p->first != id) {
      fail(ErrorCode::kDomainMismatch, "confusion: no prediction for " + id);
    }
    const bool predicted = p->second >= cutoff;
    if (label == Label::kPositive) {
      ++(predicted ? cm.tp : cm.fn);
    } else if (label == Label::kNegative) {
      ++(predicted ? cm.fp : cm.tn);
    } else {
      fail(ErrorCode::kInvalidArgument, "confusion: record " + id + " is unlabeled");
    }
    ++p;
  }
  return cm;
}

double f_beta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  return denom > 0.0 ? (1.0 + b2) * precision * recall / denom : 0.0;
}

MetricReport metrics(const ConfusionMatrix& cm, double beta) {
  if (!(beta > 0.0)) fail(ErrorCode::kInvalidArgument, "metrics: beta must be positive");
  MetricReport r;
  r.beta = beta;
  if (cm.tp + cm.fp > 0) {
    r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  } else {
    r.precision_undefined = true;
  }
  if (cm.tp + cm.fn > 0) {
    r.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  } else {
    r.recall_undefined = true;
  }
  r.f1 = f_beta(r.precision, r.recall, 1.0);
  r.fbeta = f_beta(r.precision, r.recall, beta);
  return r;
}

double compute_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::kDomainMismatch, "compute_auc: scores and labels differ in length");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Sum of positive ranks with midranks for ties (ranks doubled to stay integral).
  uint64_t positives = 0;
  uint64_t negatives = 0;
  uint64_t doubled_rank_sum = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const uint64_t doubled_mid = static_cast<uint64_t>(i + 1 + j);  // 2 * average of ranks i+1..j
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        ++positives;
        doubled_rank_sum += doubled_mid;
      } else {
        ++negatives;
      }
    }
    i = j;
  }
  if (positives == 0 || negatives == 0) {
    fail(ErrorCode::kSingleClass, "compute_auc: need both classes");
  }
  // U = R_pos - n_pos (n_pos + 1) / 2, all doubled.
  const uint64_t doubled_u = doubled_rank_sum - positives * (positives + 1);
  return static_cast<double>(doubled_u) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double compute_auc(const std::map<std::string, Label>& labels,
                   const std::map<std::string, double>& predictions) {
  std::vector<double> scores;
  std::vector<int> ys;
  for (const auto& [id, label] : labels) {
    const auto it = predictions.find(id);
    if (it == predictions.end()) {
      fail(ErrorCode::kDomainMismatch, "compute_auc: no prediction for " + id);
    }
    if (label == Label::kUnlabeled) continue;
    scores.push_back(it->second);
    ys.push_back(label == Label::kPositive ? 1 : 0);
  }
  return compute_auc(scores, ys);
}

}  // namespace triage
