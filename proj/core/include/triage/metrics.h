#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "triage/corpus.h"

namespace triage {

struct ConfusionMatrix {
  uint64_t tp = 0;
  uint64_t tn = 0;
  uint64_t fp = 0;
  uint64_t fn = 0;

  uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Zero denominators yield 0 with the matching *_undefined flag set.
struct MetricReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fbeta = 0.0;
  double beta = 1.0;
  std::optional<double> auc;
  bool precision_undefined = false;
  bool recall_undefined = false;

  bool operator==(const MetricReport&) const = default;
};

void to_json(nlohmann::json& j, const ConfusionMatrix& cm);
void from_json(const nlohmann::json& j, ConfusionMatrix& cm);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

// Counts over the shared id domain; kDomainMismatch if the key sets differ.
ConfusionMatrix confusion(const std::map<std::string, Label>& labels,
                          const std::map<std::string, double>& predictions,
                          double cutoff = 0.5);

MetricReport metrics(const ConfusionMatrix& cm, double beta);

// F-beta from precision and recall; 0 when both are 0.
double f_beta(double precision, double recall, double beta);

// Mann-Whitney probability that a random positive outranks a random
// negative, ties counted one half. kSingleClass without both classes.
double compute_auc(const std::map<std::string, Label>& labels,
                   const std::map<std::string, double>& predictions);
double compute_auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace triage
