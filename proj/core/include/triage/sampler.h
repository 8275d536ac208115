#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/corpus.h"
#include "triage/topics.h"

namespace triage {

struct QuotaPlan {
  size_t total = 700;
  double target_share = 0.6;
  size_t per_nontarget_floor = 3;
  std::optional<size_t> per_topic_cap;
  // When false, unflagged topics receive only their floor.
  bool redistribute_residual = true;

  void validate(size_t nontarget_topics) const;
};

enum class Strategy { kDiversitySeed, kUncertainNegative, kPositivePrediction, kFnMining };
std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

// An ordered request for oracle labels. `scores` is parallel to
// `record_ids`: the positive-class probability that put the record in the
// batch (or the centroid distance for seed batches).
struct QueryBatch {
  std::string id;
  Strategy strategy = Strategy::kDiversitySeed;
  std::optional<Pool> pool;
  std::vector<std::string> record_ids;
  std::vector<double> scores;
  int round = 0;
  std::string created_at;

  bool operator==(const QueryBatch&) const = default;
};

void to_json(nlohmann::json& j, const QueryBatch& b);
void from_json(const nlohmann::json& j, QueryBatch& b);

using Predictions = std::map<std::string, double>;

// Per-topic sample sizes; flagged topics share round(total * target_share)
// by largest-remainder apportionment.
std::vector<size_t> allocate_quota(const TopicModel& model, const QuotaPlan& plan);

// Largest-remainder apportionment of `amount` over `weights`, honouring
// per-slot `limits`; leftovers spill to slots still under their limit.
std::vector<size_t> apportion(size_t amount, std::span<const size_t> weights,
                              std::span<const size_t> limits);

// Picks `quota` ids spread evenly along a distance-ordered list, always
// starting with the closest record.
std::vector<std::string> interval_sample(std::span<const std::string> ordered_ids,
                                         size_t quota);
std::vector<size_t> interval_indices(size_t length, size_t quota);

// Diversity seed batch: allocate_quota followed by interval_sample per topic.
QueryBatch seed_sample(const TopicModel& model, const QuotaPlan& plan);

// Negative predictions whose negative-class confidence is below `threshold`.
QueryBatch uncertain_negatives(const Predictions& predictions, double threshold = 0.90);
QueryBatch positive_predictions(const Predictions& predictions);
// Confident negatives (confidence >= threshold) that the keyword rules hit.
QueryBatch mine_false_negatives(const Predictions& predictions,
                                const std::map<std::string, std::string>& clean_texts,
                                const FilterRuleSet& rules, double threshold = 0.90);

inline bool is_predicted_positive(double p) { return p >= 0.5; }
inline bool is_confident_negative(double p, double threshold) {
  return !is_predicted_positive(p) && (1.0 - p) >= threshold;
}

}  // namespace triage
