#include "triage/topics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "triage/error.h"
#include "triage/rng.h"
#include "triage/text.h"

namespace triage {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

size_t nearest_index(const std::vector<std::vector<double>>& centroids,
                     std::span<const double> v) {
  size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(centroids[c], v);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

struct Canonical {
  std::vector<std::string> ids;
  std::vector<const std::vector<double>*> points;
};

Canonical canonicalize(std::span<const std::string> ids,
                       std::span<const EmbeddingVector> vectors) {
  if (ids.size() != vectors.size()) {
    fail(ErrorCode::kInvalidArgument, "topics: ids and vectors differ in length");
  }
  std::vector<size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return ids[a] < ids[b]; });
  Canonical c;
  for (size_t i : order) {
    if (!c.ids.empty() && c.ids.back() == ids[i]) {
      fail(ErrorCode::kInvalidArgument, "topics: duplicate id " + ids[i]);
    }
    c.ids.push_back(ids[i]);
    c.points.push_back(&vectors[i].values);
  }
  return c;
}

void reassign(TopicModel& m, const std::vector<const std::vector<double>*>& points) {
  for (size_t i = 0; i < points.size(); ++i) {
    m.assignment[i] = nearest_index(m.centroids, *points[i]);
    m.distances[i] = euclidean(m.centroids[m.assignment[i]], *points[i]);
  }
}

std::string trim_punct(const std::string& token) {
  static constexpr std::string_view kPunct = ".,;:!?()[]{}\"'-";
  const size_t b = token.find_first_not_of(kPunct);
  if (b == std::string::npos) return {};
  const size_t e = token.find_last_not_of(kPunct);
  return token.substr(b, e - b + 1);
}

}  // namespace

double euclidean(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

std::vector<size_t> TopicModel::member_counts() const {
  std::vector<size_t> counts(k, 0);
  for (size_t t : assignment) ++counts[t];
  return counts;
}

std::vector<std::string> TopicModel::members_by_distance(size_t topic) const {
  std::vector<size_t> idx;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (assignment[i] == topic) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (distances[a] != distances[b]) return distances[a] < distances[b];
    return ids[a] < ids[b];
  });
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(ids[i]);
  return out;
}

std::optional<size_t> TopicModel::topic_of(const std::string& id) const {
  const auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return assignment[static_cast<size_t>(it - ids.begin())];
}

size_t TopicModel::nearest(std::span<const double> v) const {
  return nearest_index(centroids, v);
}

size_t TopicModel::flagged_count() const {
  return static_cast<size_t>(std::count(target_flag.begin(), target_flag.end(), true));
}

TopicModel cluster(std::span<const std::string> ids,
                   std::span<const EmbeddingVector> vectors, size_t k,
                   uint64_t seed, size_t max_iterations) {
  if (k < 2 || vectors.size() < k) {
    fail(ErrorCode::kInvalidArgument, "cluster: need |vectors| >= k >= 2");
  }
  const Canonical c = canonicalize(ids, vectors);
  const size_t n = c.points.size();
  const size_t dim = c.points.front()->size();
  for (const auto* p : c.points) {
    if (p->size() != dim) fail(ErrorCode::kDimensionMismatch, "cluster: mixed dimensions");
  }

  TopicModel m;
  m.k = k;
  m.ids = c.ids;
  m.assignment.assign(n, 0);
  m.distances.assign(n, 0.0);
  m.keywords.assign(k, {});
  m.target_flag.assign(k, false);

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<size_t> centers{static_cast<size_t>(rng.below(n))};
  std::vector<double> d2(n);
  for (size_t i = 0; i < n; ++i) d2[i] = squared_distance(*c.points[i], *c.points[centers[0]]);
  while (centers.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (total <= 0.0) break;
    const double target = rng.uniform() * total;
    double cumulative = 0.0;
    size_t chosen = n;
    for (size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      cumulative += d2[i];
      chosen = i;
      if (cumulative > target) break;
    }
    centers.push_back(chosen);
    for (size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(*c.points[i], *c.points[chosen]));
    }
  }
  if (centers.size() == 1) {
    // All vectors coincide.
    m.degenerate = true;
    m.centroids.assign(k, *c.points[centers[0]]);
    return m;
  }
  // Fewer distinct points than k: the remaining centroids duplicate the first.
  while (centers.size() < k) centers.push_back(centers.front());
  for (size_t ci : centers) m.centroids.push_back(*c.points[ci]);
  reassign(m, c.points);

  for (size_t iter = 0; iter < max_iterations; ++iter) {
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<size_t> counts(k, 0);
    for (size_t i = 0; i < n; ++i) {
      auto& s = sums[m.assignment[i]];
      for (size_t d = 0; d < dim; ++d) s[d] += (*c.points[i])[d];
      ++counts[m.assignment[i]];
    }
    for (size_t t = 0; t < k; ++t) {
      if (counts[t] == 0) continue;
      for (size_t d = 0; d < dim; ++d) m.centroids[t][d] = sums[t][d] / counts[t];
    }
    // Re-seed empty topics with the worst-fitting record when that record
    // is not already sitting on a centroid.
    for (size_t t = 0; t < k; ++t) {
      if (counts[t] != 0) continue;
      size_t worst = n;
      double worst_d = 0.0;
      for (size_t i = 0; i < n; ++i) {
        if (counts[m.assignment[i]] <= 1) continue;
        const double d = squared_distance(*c.points[i], m.centroids[m.assignment[i]]);
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      if (worst == n) break;
      --counts[m.assignment[worst]];
      m.centroids[t] = *c.points[worst];
      m.assignment[worst] = t;
      counts[t] = 1;
    }
    const std::vector<size_t> before = m.assignment;
    reassign(m, c.points);
    if (m.assignment == before) break;
  }
  return m;
}

TopicModel reduce_topics(const TopicModel& model,
                         std::span<const std::string> ids,
                         std::span<const EmbeddingVector> vectors,
                         size_t target_k) {
  if (target_k < 1) fail(ErrorCode::kInvalidTarget, "reduce_topics: target_k < 1");
  if (target_k >= model.k) {
    fail(ErrorCode::kInvalidTarget, "reduce_topics: target_k must be below k=" +
                                        std::to_string(model.k));
  }
  const Canonical c = canonicalize(ids, vectors);
  if (c.ids != model.ids) {
    fail(ErrorCode::kInvalidArgument, "reduce_topics: vectors do not match model records");
  }

  TopicModel m = model;
  while (m.k > target_k) {
    const auto counts = m.member_counts();
    const size_t smallest = static_cast<size_t>(
        std::min_element(counts.begin(), counts.end()) - counts.begin());
    size_t into = smallest == 0 ? 1 : 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < m.k; ++t) {
      if (t == smallest) continue;
      const double d = squared_distance(m.centroids[t], m.centroids[smallest]);
      if (d < best) {
        best = d;
        into = t;
      }
    }
    for (auto& a : m.assignment) {
      if (a == smallest) a = into;
    }
    // Merged centroid is the mean of its members.
    const size_t dim = m.centroids[into].size();
    std::vector<double> mean(dim, 0.0);
    size_t members = 0;
    for (size_t i = 0; i < m.ids.size(); ++i) {
      if (m.assignment[i] != into) continue;
      for (size_t d = 0; d < dim; ++d) mean[d] += (*c.points[i])[d];
      ++members;
    }
    if (members > 0) {
      for (double& x : mean) x /= static_cast<double>(members);
      m.centroids[into] = std::move(mean);
    }
    m.centroids.erase(m.centroids.begin() + static_cast<std::ptrdiff_t>(smallest));
    for (auto& a : m.assignment) {
      if (a > smallest) --a;
    }
    --m.k;
  }
  reassign(m, c.points);
  m.keywords.assign(m.k, {});
  m.target_flag.assign(m.k, false);
  return m;
}

std::vector<std::string> keyword_tokens(const std::string& text,
                                        const std::set<std::string>& stopwords) {
  std::vector<std::string> out;
  for (const auto& raw : text::split_whitespace(text)) {
    std::string token = trim_punct(text::to_lower(raw));
    if (token.empty() || stopwords.contains(token)) continue;
    out.push_back(std::move(token));
  }
  return out;
}

TopicModel summarize(TopicModel model, const std::map<std::string, std::string>& texts,
                     size_t top_n, const std::set<std::string>& stopwords) {
  if (top_n < 1) fail(ErrorCode::kInvalidArgument, "summarize: top_n must be >= 1");
  std::vector<std::map<std::string, double>> counts(model.k);
  std::vector<double> token_totals(model.k, 0.0);
  for (size_t i = 0; i < model.ids.size(); ++i) {
    const auto it = texts.find(model.ids[i]);
    if (it == texts.end()) continue;
    const auto tokens = keyword_tokens(it->second, stopwords);
    const size_t t = model.assignment[i];
    token_totals[t] += static_cast<double>(tokens.size());
    for (auto& gram : text::word_ngrams(tokens, 1, 2)) counts[t][gram] += 1.0;
  }
  std::map<std::string, size_t> topic_frequency;
  for (const auto& topic_counts : counts) {
    for (const auto& [gram, n] : topic_counts) ++topic_frequency[gram];
  }
  model.keywords.assign(model.k, {});
  for (size_t t = 0; t < model.k; ++t) {
    std::vector<Keyword> scored;
    for (const auto& [gram, n] : counts[t]) {
      const double idf = std::log(static_cast<double>(model.k) /
                                  static_cast<double>(topic_frequency[gram]));
      const double score = (n / token_totals[t]) * idf;
      if (score > 0.0) scored.push_back({gram, score});
    }
    std::sort(scored.begin(), scored.end(), [](const Keyword& a, const Keyword& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.ngram < b.ngram;
    });
    if (scored.size() > top_n) scored.resize(top_n);
    model.keywords[t] = std::move(scored);
  }
  return model;
}

TopicModel flag_target_topics(TopicModel model, const std::map<std::string, bool>& probe,
                              double threshold) {
  std::vector<size_t> probed(model.k, 0);
  std::vector<size_t> positive(model.k, 0);
  const auto counts = model.member_counts();
  for (size_t i = 0; i < model.ids.size(); ++i) {
    const auto it = probe.find(model.ids[i]);
    if (it == probe.end()) continue;
    ++probed[model.assignment[i]];
    if (it->second) ++positive[model.assignment[i]];
  }
  model.target_flag.assign(model.k, false);
  for (size_t t = 0; t < model.k; ++t) {
    if (counts[t] == 0) continue;
    if (probed[t] == 0) {
      fail(ErrorCode::kUnprobedTopic, "topic " + std::to_string(t) + " has no probed members");
    }
    model.target_flag[t] = static_cast<double>(positive[t]) /
                               static_cast<double>(probed[t]) >= threshold;
  }
  return model;
}

void to_json(nlohmann::json& j, const TopicModel& m) {
  nlohmann::json assignment = nlohmann::json::object();
  nlohmann::json distances = nlohmann::json::object();
  for (size_t i = 0; i < m.ids.size(); ++i) {
    assignment[m.ids[i]] = m.assignment[i];
    distances[m.ids[i]] = m.distances[i];
  }
  nlohmann::json keywords = nlohmann::json::array();
  for (const auto& topic : m.keywords) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& kw : topic) row.push_back({{"ngram", kw.ngram}, {"score", kw.score}});
    keywords.push_back(std::move(row));
  }
  j = nlohmann::json{{"k", m.k},
                     {"degenerate", m.degenerate},
                     {"centroids", m.centroids},
                     {"assignment", std::move(assignment)},
                     {"distances", std::move(distances)},
                     {"keywords", std::move(keywords)},
                     {"target_flag", m.target_flag}};
}

void from_json(const nlohmann::json& j, TopicModel& m) {
  m.k = j.at("k").get<size_t>();
  m.degenerate = j.value("degenerate", false);
  m.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
  m.ids.clear();
  m.assignment.clear();
  m.distances.clear();
  const auto& distances = j.at("distances");
  for (const auto& [id, topic] : j.at("assignment").items()) {
    m.ids.push_back(id);
    m.assignment.push_back(topic.get<size_t>());
    m.distances.push_back(distances.at(id).get<double>());
  }
  m.keywords.assign(m.k, {});
  if (j.contains("keywords")) {
    for (size_t t = 0; t < m.k && t < j["keywords"].size(); ++t) {
      for (const auto& kw : j["keywords"][t]) {
        m.keywords[t].push_back({kw.at("ngram").get<std::string>(), kw.at("score").get<double>()});
      }
    }
  }
  m.target_flag = j.value("target_flag", std::vector<bool>(m.k, false));
}

const std::set<std::string>& english_stopwords() {
  static const std::set<std::string> words = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you",
      "you're", "you've", "you'll", "you'd", "your", "yours", "yourself",
      "yourselves", "he", "him", "his", "himself", "she", "she's", "her",
      "hers", "herself", "it", "it's", "its", "itself", "they", "them",
      "their", "theirs", "themselves", "what", "which", "who", "whom", "this",
      "that", "that'll", "these", "those", "am", "is", "are", "was", "were",
      "be", "been", "being", "have", "has", "had", "having", "do", "does",
      "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because",
      "as", "until", "while", "of", "at", "by", "for", "with", "about",
      "against", "between", "into", "through", "during", "before", "after",
      "above", "below", "to", "from", "up", "down", "in", "out", "on", "off",
      "over", "under", "again", "further", "then", "once", "here", "there",
      "when", "where", "why", "how", "all", "any", "both", "each", "few",
      "more", "most", "other", "some", "such", "no", "nor", "not", "only",
      "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
      "just", "don", "don't", "should", "should've", "now", "d", "ll", "m",
      "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't",
      "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn",
      "hasn't", "haven", "haven't", "isn", "isn't", "ma", "mightn",
      "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
      "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won",
      "won't", "wouldn", "wouldn't"};
  return words;
}

}  // namespace triage
