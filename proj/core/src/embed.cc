#include "triage/embed.h"

#include <cmath>
#include <future>

#include "httplib.h"
#include "triage/rng.h"
#include "triage/text.h"

namespace triage {

namespace {

constexpr uint64_t kSignSalt = 0x5bd1e9955bd1e995ULL;

void normalize(EmbeddingVector& v) {
  const double norm = l2_norm(v.values);
  if (norm > 0.0) {
    for (double& x : v.values) x /= norm;
    v.norm = Norm::kUnit;
  } else {
    v.norm = Norm::kRaw;
  }
}

}  // namespace

void EmbedderSpec::validate() const {
  if (dim < 16) fail(ErrorCode::kConfig, "embedder: dim must be >= 16");
  if (ngram_lo < 1 || ngram_lo > ngram_hi || ngram_hi > 3) {
    fail(ErrorCode::kConfig, "embedder: ngram range must satisfy 1 <= lo <= hi <= 3");
  }
  if (kind == EmbedderKind::kExternal && (!endpoint || endpoint->empty())) {
    fail(ErrorCode::kConfig, "embedder: external kind requires an endpoint");
  }
  if (max_in_flight == 0 || request_chunk == 0) {
    fail(ErrorCode::kConfig, "embedder: max_in_flight and request_chunk must be positive");
  }
}

void to_json(nlohmann::json& j, const EmbedderSpec& s) {
  j = nlohmann::json{
      {"kind", s.kind == EmbedderKind::kHashedNgram ? "hashed_ngram" : "external"},
      {"dim", s.dim},
      {"ngram_range", {s.ngram_lo, s.ngram_hi}},
      {"seed", s.seed}};
  if (s.endpoint) j["endpoint"] = *s.endpoint;
}

void from_json(const nlohmann::json& j, EmbedderSpec& s) {
  const std::string kind = j.value("kind", std::string("hashed_ngram"));
  if (kind == "hashed_ngram") {
    s.kind = EmbedderKind::kHashedNgram;
  } else if (kind == "external") {
    s.kind = EmbedderKind::kExternal;
  } else {
    fail(ErrorCode::kConfig, "embedder: unknown kind '" + kind + "'");
  }
  s.dim = j.value("dim", size_t{512});
  if (j.contains("ngram_range")) {
    s.ngram_lo = j["ngram_range"].at(0).get<int>();
    s.ngram_hi = j["ngram_range"].at(1).get<int>();
  }
  s.seed = j.value("seed", uint64_t{0});
  if (j.contains("endpoint")) s.endpoint = j["endpoint"].get<std::string>();
}

std::vector<EmbeddingVector> Embedder::embed_batch(
    std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

HashedNgramEmbedder::HashedNgramEmbedder(EmbedderSpec spec)
    : Embedder(std::move(spec)) {
  this->spec().validate();
}

EmbeddingVector HashedNgramEmbedder::embed(std::string_view input) const {
  const EmbedderSpec& s = spec();
  EmbeddingVector v;
  v.values.assign(s.dim, 0.0);
  const auto grams =
      text::word_ngrams(text::split_whitespace(input), s.ngram_lo, s.ngram_hi);
  for (const auto& gram : grams) {
    const uint64_t slot = stable_hash(gram, s.seed) % s.dim;
    const bool negative = (stable_hash(gram, s.seed ^ kSignSalt) & 1U) != 0;
    v.values[slot] += negative ? -1.0 : 1.0;
  }
  normalize(v);
  return v;
}

ExternalEmbedder::ExternalEmbedder(EmbedderSpec spec) : Embedder(std::move(spec)) {
  this->spec().validate();
}

EmbeddingVector ExternalEmbedder::embed(std::string_view text) const {
  const std::string one(text);
  return request(std::span<const std::string>(&one, 1), 0).front();
}

std::vector<EmbeddingVector> ExternalEmbedder::request(
    std::span<const std::string> texts, size_t offset) const {
  const EmbedderSpec& s = spec();
  httplib::Client client(*s.endpoint);
  client.set_connection_timeout(s.timeout_seconds);
  client.set_read_timeout(s.timeout_seconds);
  const nlohmann::json body(std::vector<std::string>(texts.begin(), texts.end()));
  auto res = client.Post("/embed", body.dump(), "application/json");
  if (!res) {
    throw EmbedderUnavailable(offset, "embedder request at index " +
                                          std::to_string(offset) + " failed: " +
                                          httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw EmbedderUnavailable(offset, "embedder returned HTTP " +
                                          std::to_string(res->status) +
                                          " for index " + std::to_string(offset));
  }
  std::vector<EmbeddingVector> out;
  try {
    const auto reply = nlohmann::json::parse(res->body);
    if (!reply.is_array() || reply.size() != texts.size()) {
      throw EmbedderUnavailable(offset, "embedder reply length mismatch at index " +
                                            std::to_string(offset));
    }
    for (const auto& row : reply) {
      EmbeddingVector v;
      v.values = row.get<std::vector<double>>();
      if (v.values.size() != s.dim) {
        throw EmbedderUnavailable(offset, "embedder reply has wrong dim at index " +
                                              std::to_string(offset));
      }
      normalize(v);
      out.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw EmbedderUnavailable(offset, std::string("embedder reply unparsable: ") + e.what());
  }
  return out;
}

std::vector<EmbeddingVector> ExternalEmbedder::embed_batch(
    std::span<const std::string> texts) const {
  const EmbedderSpec& s = spec();
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  size_t next = 0;
  while (next < texts.size()) {
    // One wave of at most max_in_flight concurrent requests.
    std::vector<std::pair<size_t, std::future<std::vector<EmbeddingVector>>>> wave;
    for (size_t k = 0; k < s.max_in_flight && next < texts.size(); ++k) {
      const size_t len = std::min(s.request_chunk, texts.size() - next);
      wave.emplace_back(next, std::async(std::launch::async, [this, texts, next, len] {
                          return request(texts.subspan(next, len), next);
                        }));
      next += len;
    }
    for (auto& [start, fut] : wave) {
      auto part = fut.get();
      for (auto& v : part) out.push_back(std::move(v));
    }
  }
  return out;
}

CachingEmbedder::CachingEmbedder(std::shared_ptr<const Embedder> inner)
    : Embedder(inner->spec()), inner_(std::move(inner)) {}

EmbeddingVector CachingEmbedder::embed(std::string_view text) const {
  const std::string key(text);
  {
    std::lock_guard lock(mu_);
    if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  EmbeddingVector v = inner_->embed(text);
  std::lock_guard lock(mu_);
  return cache_.emplace(key, std::move(v)).first->second;
}

std::vector<EmbeddingVector> CachingEmbedder::embed_batch(
    std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::string> missing;
  std::vector<size_t> slots;
  {
    std::lock_guard lock(mu_);
    for (size_t i = 0; i < texts.size(); ++i) {
      if (const auto it = cache_.find(texts[i]); it != cache_.end()) {
        out[i] = it->second;
      } else {
        missing.push_back(texts[i]);
        slots.push_back(i);
      }
    }
  }
  if (missing.empty()) return out;
  auto fresh = inner_->embed_batch(missing);
  std::lock_guard lock(mu_);
  for (size_t i = 0; i < fresh.size(); ++i) {
    out[slots[i]] = fresh[i];
    cache_.emplace(missing[i], std::move(fresh[i]));
  }
  return out;
}

size_t CachingEmbedder::cached() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
  if (spec.kind == EmbedderKind::kExternal) {
    return std::make_unique<ExternalEmbedder>(spec);
  }
  return std::make_unique<HashedNgramEmbedder>(spec);
}

EmbeddingVector embed_text(std::string_view text, const EmbedderSpec& spec) {
  return make_embedder(spec)->embed(text);
}

std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                         const EmbedderSpec& spec) {
  return make_embedder(spec)->embed_batch(texts);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kDimensionMismatch, "dot: dimension mismatch");
  }
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  const double na = l2_norm(a.values);
  const double nb = l2_norm(b.values);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a.values, b.values) / (na * nb);
}

}  // namespace triage
