#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace triage {

enum class Sex { kMale, kFemale, kUnknown };
enum class Pool { kFocused, kDeployment, kSynthetic };
enum class Label { kPositive, kNegative, kUnlabeled };
enum class LabelSource { kHuman, kSimulated, kCounterfactual, kNone };

std::string_view to_string(Sex v);
std::string_view to_string(Pool v);
std::string_view to_string(Label v);
std::string_view to_string(LabelSource v);
Sex parse_sex(std::string_view s);
Pool parse_pool(std::string_view s);
Label parse_label(std::string_view s);
LabelSource parse_label_source(std::string_view s);

inline Label flip(Label l) {
  return l == Label::kPositive   ? Label::kNegative
         : l == Label::kNegative ? Label::kPositive
                                 : Label::kUnlabeled;
}

// One emergency-department triage note.
struct TriageRecord {
  std::string id;
  std::string raw_text;
  std::string clean_text;
  std::optional<int> age;
  Sex sex = Sex::kUnknown;
  std::optional<std::string> site;
  std::optional<std::string> timestamp;
  Pool pool = Pool::kFocused;
  Label label = Label::kUnlabeled;
  LabelSource label_source = LabelSource::kNone;

  bool operator==(const TriageRecord&) const = default;
};

// Throws kInvariantViolation naming the first broken record invariant.
void check_invariants(const TriageRecord& record);

// Keyword rules shared by pool construction, false-negative mining and the
// pattern-matching baseline. All terms are matched as lowercase substrings.
struct FilterRuleSet {
  std::string version = "starter-1";
  std::vector<std::string> include_terms;
  std::vector<std::string> exclude_phrases;
  size_t min_length = 3;

  void validate() const;

  // Documented starter list; deployments are expected to override it.
  static FilterRuleSet starter();
};

enum class FilterVerdict { kRetained, kTooShort, kNoIncludeTerm, kExcludedOnly };
std::string_view to_string(FilterVerdict v);

// Lowercases, strips every literal fragment in `strip_patterns`, collapses
// whitespace and prefixes "<age> <sex> " ("unk" for missing fields).
TriageRecord preprocess(TriageRecord record,
                        std::span<const std::string> strip_patterns);
std::string sex_word(Sex sex);

FilterVerdict classify_text(std::string_view clean_text,
                            const FilterRuleSet& rules);

struct FilterResult {
  std::vector<TriageRecord> retained;
  std::vector<TriageRecord> rejected;
  std::vector<FilterVerdict> rejection_reasons;  // parallel to `rejected`
};

FilterResult keyword_filter(std::span<const TriageRecord> records,
                            const FilterRuleSet& rules);

bool pattern_match(const TriageRecord& record, const FilterRuleSet& rules);
bool pattern_match_text(std::string_view clean_text, const FilterRuleSet& rules);

// Include-term occurrences in `text` as (offset, length), for highlighting.
std::vector<std::pair<size_t, size_t>> include_matches(
    std::string_view text, const FilterRuleSet& rules);
bool contains_include_term(std::string_view text, const FilterRuleSet& rules);

void to_json(nlohmann::json& j, const TriageRecord& r);
void from_json(const nlohmann::json& j, TriageRecord& r);
void to_json(nlohmann::json& j, const FilterRuleSet& r);
void from_json(const nlohmann::json& j, FilterRuleSet& r);

// Line-delimited JSON, one record per line.
std::vector<TriageRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path,
                   std::span<const TriageRecord> records);
void write_rejections(const std::filesystem::path& path,
                      const FilterResult& result);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path,
                 std::span<const nlohmann::json> rows);
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace triage
