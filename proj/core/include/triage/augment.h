#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/corpus.h"

namespace triage {

enum class FlipDirection { kToNegative, kToPositive };
enum class EditKind { kRemoval, kInsertion };
std::string_view to_string(FlipDirection d);
std::string_view to_string(EditKind k);
FlipDirection parse_direction(std::string_view s);

// A label-flipped record and the exact edit that produced it. `edit_text`
// is the byte string spliced at `offset` of the longer of the two texts:
// the span plus the one separating space that goes with it.
struct CounterfactualPair {
  std::string source_id;
  std::string synthetic_id;
  FlipDirection direction = FlipDirection::kToNegative;
  std::string edit_span;
  EditKind edit_kind = EditKind::kRemoval;
  int round = 0;
  size_t offset = 0;
  std::string edit_text;
  std::string split = "train";

  bool operator==(const CounterfactualPair&) const = default;
};

void to_json(nlohmann::json& j, const CounterfactualPair& p);
void from_json(const nlohmann::json& j, CounterfactualPair& p);

struct FlipResult {
  CounterfactualPair pair;
  TriageRecord synthetic;
};

// Removes `span` (and one adjoining space) from a positive record.
FlipResult flip_to_negative(const TriageRecord& source, std::string_view span,
                            const FilterRuleSet& rules, int round,
                            std::string synthetic_id);

// Inserts `span` before token `position` (== token count appends) of a
// negative record.
FlipResult flip_to_positive(const TriageRecord& source, std::string_view span,
                            size_t position, const FilterRuleSet& rules, int round,
                            std::string synthetic_id);

// Undoes the edit on the synthetic text, giving back the source text.
std::string invert_edit(const CounterfactualPair& pair, std::string_view synthetic_text);
// Replays the edit on the source text.
std::string apply_edit(const CounterfactualPair& pair, std::string_view source_text);

// Append-only register of counterfactual pairs; writers are serialised.
class CounterfactualLedger {
 public:
  CounterfactualLedger() = default;
  CounterfactualLedger(const CounterfactualLedger& other);
  CounterfactualLedger& operator=(const CounterfactualLedger& other);

  // kInvalidArgument if the synthetic id is already registered.
  void add(const CounterfactualPair& pair);
  std::vector<CounterfactualPair> pairs() const;
  bool is_synthetic(const std::string& id) const;
  const CounterfactualPair* find(const std::string& synthetic_id) const;
  size_t size() const;

  // Every synthetic-pool record must appear in exactly one pair.
  void check_complete(std::span<const TriageRecord> records) const;

  void save(const std::filesystem::path& path) const;
  static CounterfactualLedger load(const std::filesystem::path& path);

 private:
  mutable std::mutex mu_;
  std::vector<CounterfactualPair> pairs_;
  std::map<std::string, size_t> by_synthetic_;
};

// Share of `ids` that are counterfactual records.
double synthetic_fraction(std::span<const std::string> ids, const CounterfactualLedger& ledger);
// The same share as a whole percent, truncated.
int synthetic_percent(double fraction);

}  // namespace triage
