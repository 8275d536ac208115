#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/embed.h"

namespace triage {

struct Keyword {
  std::string ngram;
  double score = 0.0;
  bool operator==(const Keyword&) const = default;
};

// Centroid clustering of the embedded focused pool. Records are held in
// ascending id order; `assignment` and `distances` are parallel to `ids`.
struct TopicModel {
  size_t k = 0;
  std::vector<std::vector<double>> centroids;
  std::vector<std::string> ids;
  std::vector<size_t> assignment;
  std::vector<double> distances;
  std::vector<std::vector<Keyword>> keywords;
  std::vector<bool> target_flag;
  // Set when every input vector was identical: one topic holds everything.
  bool degenerate = false;

  std::vector<size_t> member_counts() const;
  // Members of `topic` in ascending distance to its centroid (ties by id).
  std::vector<std::string> members_by_distance(size_t topic) const;
  std::optional<size_t> topic_of(const std::string& id) const;
  // Index of the nearest centroid (ties to the lower index).
  size_t nearest(std::span<const double> v) const;
  size_t flagged_count() const;

  bool operator==(const TopicModel&) const = default;
};

void to_json(nlohmann::json& j, const TopicModel& m);
void from_json(const nlohmann::json& j, TopicModel& m);

double euclidean(std::span<const double> a, std::span<const double> b);

// k-means with k-means++ seeding; stops at an assignment fixed point or
// after max_iterations. Deterministic in (ids, vectors, k, seed) and
// independent of the input order.
TopicModel cluster(std::span<const std::string> ids,
                   std::span<const EmbeddingVector> vectors, size_t k,
                   uint64_t seed, size_t max_iterations = 300);

// Repeatedly folds the smallest topic into the topic with the nearest
// centroid until target_k topics remain, then reassigns every record to
// its nearest centroid. Keywords and flags are cleared.
TopicModel reduce_topics(const TopicModel& model,
                         std::span<const std::string> ids,
                         std::span<const EmbeddingVector> vectors,
                         size_t target_k);

// Class-based tf-idf over stop-word-filtered 1- and 2-grams.
TopicModel summarize(TopicModel model,
                     const std::map<std::string, std::string>& texts,
                     size_t top_n, const std::set<std::string>& stopwords);

TopicModel flag_target_topics(TopicModel model,
                              const std::map<std::string, bool>& probe,
                              double threshold = 0.5);

// NLTK's English stop-word list.
const std::set<std::string>& english_stopwords();

// Tokenisation used for keyword extraction: whitespace split, edge
// punctuation trimmed, stop words dropped.
std::vector<std::string> keyword_tokens(const std::string& text,
                                        const std::set<std::string>& stopwords);

}  // namespace triage
