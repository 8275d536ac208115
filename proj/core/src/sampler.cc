#include "triage/sampler.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "triage/error.h"

namespace triage {

namespace {

QueryBatch ordered_batch(Strategy strategy, std::vector<std::pair<std::string, double>> rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  QueryBatch batch;
  batch.strategy = strategy;
  for (auto& [id, p] : rows) {
    batch.record_ids.push_back(std::move(id));
    batch.scores.push_back(p);
  }
  return batch;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kDiversitySeed: return "diversity_seed";
    case Strategy::kUncertainNegative: return "uncertain_negative";
    case Strategy::kPositivePrediction: return "positive_prediction";
    case Strategy::kFnMining: return "fn_mining";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  for (Strategy v : {Strategy::kDiversitySeed, Strategy::kUncertainNegative,
                     Strategy::kPositivePrediction, Strategy::kFnMining}) {
    if (to_string(v) == s) return v;
  }
  fail(ErrorCode::kInvalidArgument, "unknown strategy '" + std::string(s) + "'");
}

void QuotaPlan::validate(size_t nontarget_topics) const {
  if (total == 0) fail(ErrorCode::kConfig, "quota plan: total must be positive");
  if (!(target_share > 0.0 && target_share < 1.0)) {
    fail(ErrorCode::kConfig, "quota plan: target_share must lie in (0,1)");
  }
  if (per_nontarget_floor * nontarget_topics > total) {
    fail(ErrorCode::kConfig, "quota plan: floor x non-target topics exceeds total");
  }
  if (per_topic_cap && *per_topic_cap == 0) {
    fail(ErrorCode::kConfig, "quota plan: per_topic_cap must be positive");
  }
}

void to_json(nlohmann::json& j, const QueryBatch& b) {
  j = nlohmann::json{{"id", b.id},
                     {"strategy", to_string(b.strategy)},
                     {"pool", b.pool ? nlohmann::json(to_string(*b.pool)) : nlohmann::json()},
                     {"record_ids", b.record_ids},
                     {"scores", b.scores},
                     {"round", b.round},
                     {"created_at", b.created_at}};
}

void from_json(const nlohmann::json& j, QueryBatch& b) {
  b.id = j.value("id", std::string());
  b.strategy = parse_strategy(j.at("strategy").get<std::string>());
  b.pool = j.contains("pool") && !j["pool"].is_null()
               ? std::optional<Pool>(parse_pool(j["pool"].get<std::string>()))
               : std::nullopt;
  b.record_ids = j.at("record_ids").get<std::vector<std::string>>();
  b.scores = j.value("scores", std::vector<double>(b.record_ids.size(), 0.0));
  b.round = j.value("round", 0);
  b.created_at = j.value("created_at", std::string());
}

std::vector<size_t> apportion(size_t amount, std::span<const size_t> weights,
                              std::span<const size_t> limits) {
  const size_t n = weights.size();
  std::vector<size_t> out(n, 0);
  size_t remaining = amount;
  while (remaining > 0) {
    std::vector<size_t> open;
    size_t weight_sum = 0;
    for (size_t i = 0; i < n; ++i) {
      if (out[i] < limits[i] && weights[i] > 0) {
        open.push_back(i);
        weight_sum += weights[i];
      }
    }
    if (open.empty()) break;
    // Largest remainder over the open slots, ties to the lower index.
    std::vector<std::pair<double, size_t>> remainders;
    size_t handed = 0;
    for (size_t i : open) {
      const double exact = static_cast<double>(remaining) *
                           static_cast<double>(weights[i]) /
                           static_cast<double>(weight_sum);
      size_t whole = static_cast<size_t>(std::floor(exact));
      whole = std::min(whole, limits[i] - out[i]);
      out[i] += whole;
      handed += whole;
      remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    size_t left = remaining - handed;
    for (const auto& [frac, i] : remainders) {
      if (left == 0) break;
      if (out[i] < limits[i]) {
        ++out[i];
        --left;
      }
    }
    if (left == remaining) break;  // nothing could be placed
    remaining = left;
  }
  return out;
}

std::vector<size_t> allocate_quota(const TopicModel& model, const QuotaPlan& plan) {
  const auto counts = model.member_counts();
  const size_t pool = std::accumulate(counts.begin(), counts.end(), size_t{0});
  std::vector<size_t> flagged, unflagged;
  for (size_t t = 0; t < model.k; ++t) {
    (model.target_flag.at(t) ? flagged : unflagged).push_back(t);
  }
  plan.validate(unflagged.size());
  if (flagged.empty() || unflagged.empty()) {
    fail(ErrorCode::kInfeasiblePlan, "allocate_quota: need flagged and unflagged topics");
  }
  if (plan.total > pool) {
    fail(ErrorCode::kInfeasiblePlan, "allocate_quota: total " + std::to_string(plan.total) +
                                         " exceeds pool of " + std::to_string(pool));
  }
  auto limit_of = [&](size_t t) {
    return plan.per_topic_cap ? std::min(counts[t], *plan.per_topic_cap) : counts[t];
  };

  std::vector<size_t> quota(model.k, 0);
  const auto flagged_target =
      static_cast<size_t>(std::llround(static_cast<double>(plan.total) * plan.target_share));
  {
    std::vector<size_t> w, lim;
    for (size_t t : flagged) {
      w.push_back(counts[t]);
      lim.push_back(limit_of(t));
    }
    const auto part = apportion(flagged_target, w, lim);
    for (size_t i = 0; i < flagged.size(); ++i) quota[flagged[i]] = part[i];
  }
  for (size_t t : unflagged) quota[t] = std::min(plan.per_nontarget_floor, limit_of(t));

  auto sum_of = [&](const std::vector<size_t>& topics) {
    size_t s = 0;
    for (size_t t : topics) s += quota[t];
    return s;
  };
  const size_t flagged_sum = sum_of(flagged);
  const size_t unflagged_sum = sum_of(unflagged);

  if (flagged_sum + unflagged_sum > plan.total) {
    // Floors overshoot: trim the largest unflagged quotas first.
    size_t excess = flagged_sum + unflagged_sum - plan.total;
    while (excess > 0) {
      size_t biggest = unflagged.front();
      for (size_t t : unflagged) {
        if (quota[t] >= quota[biggest]) biggest = t;
      }
      if (quota[biggest] == 0) break;
      --quota[biggest];
      --excess;
    }
  } else if (plan.redistribute_residual) {
    size_t residual = plan.total - flagged_sum - unflagged_sum;
    for (const auto* group : {&unflagged, &flagged}) {
      if (residual == 0) break;
      std::vector<size_t> w, lim;
      for (size_t t : *group) {
        w.push_back(counts[t]);
        lim.push_back(limit_of(t) - quota[t]);
      }
      const auto extra = apportion(residual, w, lim);
      for (size_t i = 0; i < group->size(); ++i) {
        quota[(*group)[i]] += extra[i];
        residual -= extra[i];
      }
    }
  }
  return quota;
}

std::vector<size_t> interval_indices(size_t length, size_t quota) {
  if (quota > length) {
    fail(ErrorCode::kQuotaExceedsCluster, "interval_sample: quota " + std::to_string(quota) +
                                              " exceeds cluster of " + std::to_string(length));
  }
  std::vector<size_t> idx;
  idx.reserve(quota);
  for (size_t i = 0; i < quota; ++i) idx.push_back(i * length / quota);
  return idx;
}

std::vector<std::string> interval_sample(std::span<const std::string> ordered_ids,
                                         size_t quota) {
  std::vector<std::string> out;
  for (size_t i : interval_indices(ordered_ids.size(), quota)) out.push_back(ordered_ids[i]);
  return out;
}

QueryBatch seed_sample(const TopicModel& model, const QuotaPlan& plan) {
  const auto quota = allocate_quota(model, plan);
  QueryBatch batch;
  batch.strategy = Strategy::kDiversitySeed;
  batch.pool = Pool::kFocused;
  for (size_t t = 0; t < model.k; ++t) {
    const auto members = model.members_by_distance(t);
    for (const auto& id : interval_sample(members, quota[t])) {
      batch.record_ids.push_back(id);
      batch.scores.push_back(model.distances[static_cast<size_t>(
          std::lower_bound(model.ids.begin(), model.ids.end(), id) - model.ids.begin())]);
    }
  }
  return batch;
}

QueryBatch uncertain_negatives(const Predictions& predictions, double threshold) {
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& [id, p] : predictions) {
    if (!is_predicted_positive(p) && !is_confident_negative(p, threshold)) rows.emplace_back(id, p);
  }
  return ordered_batch(Strategy::kUncertainNegative, std::move(rows));
}

QueryBatch positive_predictions(const Predictions& predictions) {
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& [id, p] : predictions) {
    if (is_predicted_positive(p)) rows.emplace_back(id, p);
  }
  return ordered_batch(Strategy::kPositivePrediction, std::move(rows));
}

QueryBatch mine_false_negatives(const Predictions& predictions,
                                const std::map<std::string, std::string>& clean_texts,
                                const FilterRuleSet& rules, double threshold) {
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& [id, p] : predictions) {
    if (!is_confident_negative(p, threshold)) continue;
    const auto it = clean_texts.find(id);
    if (it == clean_texts.end()) {
      fail(ErrorCode::kUnknownRecord, "mine_false_negatives: no text for " + id);
    }
    if (pattern_match_text(it->second, rules)) rows.emplace_back(id, p);
  }
  return ordered_batch(Strategy::kFnMining, std::move(rows));
}

}  // namespace triage
