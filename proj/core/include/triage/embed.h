#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/error.h"

namespace triage {

enum class Norm { kUnit, kRaw };

struct EmbeddingVector {
  std::vector<double> values;
  Norm norm = Norm::kRaw;

  size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

enum class EmbedderKind { kHashedNgram, kExternal };

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::kHashedNgram;
  size_t dim = 512;
  int ngram_lo = 1;
  int ngram_hi = 2;
  uint64_t seed = 0;
  // external backend only
  std::optional<std::string> endpoint;
  size_t max_in_flight = 4;
  size_t request_chunk = 64;
  int timeout_seconds = 30;

  void validate() const;
};

void to_json(nlohmann::json& j, const EmbedderSpec& s);
void from_json(const nlohmann::json& j, EmbedderSpec& s);

// Raised by the external backend; `index` is the first input position of the
// request that failed.
class EmbedderUnavailable : public Error {
 public:
  EmbedderUnavailable(size_t index, const std::string& message)
      : Error(ErrorCode::kEmbedderUnavailable, message), index_(index) {}
  size_t index() const noexcept { return index_; }

 private:
  size_t index_;
};

// Embedders are immutable after construction and safe to share across threads.
class Embedder {
 public:
  explicit Embedder(EmbedderSpec spec) : spec_(std::move(spec)) {}
  virtual ~Embedder() = default;

  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(
      std::span<const std::string> texts) const;

  const EmbedderSpec& spec() const { return spec_; }

 private:
  EmbedderSpec spec_;
};

// Signed feature hashing over word n-grams, L2-normalised.
class HashedNgramEmbedder final : public Embedder {
 public:
  explicit HashedNgramEmbedder(EmbedderSpec spec);
  EmbeddingVector embed(std::string_view text) const override;
};

// Client for a sentence-embedding service: POST <endpoint>/embed with a JSON
// array of strings, answered by an equal-length array of dim-length arrays.
class ExternalEmbedder final : public Embedder {
 public:
  explicit ExternalEmbedder(EmbedderSpec spec);
  EmbeddingVector embed(std::string_view text) const override;
  std::vector<EmbeddingVector> embed_batch(
      std::span<const std::string> texts) const override;

 private:
  std::vector<EmbeddingVector> request(std::span<const std::string> texts,
                                       size_t offset) const;
};

// Memoises another embedder by text; safe for concurrent use.
class CachingEmbedder final : public Embedder {
 public:
  explicit CachingEmbedder(std::shared_ptr<const Embedder> inner);
  EmbeddingVector embed(std::string_view text) const override;
  std::vector<EmbeddingVector> embed_batch(
      std::span<const std::string> texts) const override;
  size_t cached() const;

 private:
  std::shared_ptr<const Embedder> inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, EmbeddingVector> cache_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

EmbeddingVector embed_text(std::string_view text, const EmbedderSpec& spec);
std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                         const EmbedderSpec& spec);

double dot(std::span<const double> a, std::span<const double> b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);
double l2_norm(std::span<const double> v);

}  // namespace triage
