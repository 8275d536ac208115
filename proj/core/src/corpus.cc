#include "triage/corpus.h"

#include <algorithm>
#include <array>
#include <fstream>

#include "triage/error.h"
#include "triage/text.h"

namespace triage {

namespace {

template <typename E, size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table,
             std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  fail(ErrorCode::kInvalidArgument,
       "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, Sex>, 3> kSexNames{{
    {"male", Sex::kMale}, {"female", Sex::kFemale}, {"unknown", Sex::kUnknown}}};
constexpr std::array<std::pair<std::string_view, Pool>, 3> kPoolNames{{
    {"focused", Pool::kFocused},
    {"deployment", Pool::kDeployment},
    {"synthetic", Pool::kSynthetic}}};
constexpr std::array<std::pair<std::string_view, Label>, 3> kLabelNames{{
    {"positive", Label::kPositive},
    {"negative", Label::kNegative},
    {"unlabeled", Label::kUnlabeled}}};
constexpr std::array<std::pair<std::string_view, LabelSource>, 4> kSourceNames{{
    {"human", LabelSource::kHuman},
    {"simulated", LabelSource::kSimulated},
    {"counterfactual", LabelSource::kCounterfactual},
    {"none", LabelSource::kNone}}};

template <typename E, size_t N>
std::string_view name_of(E v, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

}  // namespace

std::string_view to_string(Sex v) { return name_of(v, kSexNames); }
std::string_view to_string(Pool v) { return name_of(v, kPoolNames); }
std::string_view to_string(Label v) { return name_of(v, kLabelNames); }
std::string_view to_string(LabelSource v) { return name_of(v, kSourceNames); }
Sex parse_sex(std::string_view s) { return parse_enum(s, kSexNames, "sex"); }
Pool parse_pool(std::string_view s) { return parse_enum(s, kPoolNames, "pool"); }
Label parse_label(std::string_view s) { return parse_enum(s, kLabelNames, "label"); }
LabelSource parse_label_source(std::string_view s) {
  return parse_enum(s, kSourceNames, "label_source");
}

std::string_view to_string(FilterVerdict v) {
  switch (v) {
    case FilterVerdict::kRetained: return "retained";
    case FilterVerdict::kTooShort: return "too_short";
    case FilterVerdict::kNoIncludeTerm: return "no_include_term";
    case FilterVerdict::kExcludedOnly: return "excluded_phrase_only";
  }
  return "?";
}

void check_invariants(const TriageRecord& r) {
  auto violated = [&r](const std::string& what) {
    fail(ErrorCode::kInvariantViolation, "record " + r.id + ": " + what);
  };
  if (r.clean_text.empty()) violated("clean_text is empty");
  if (r.clean_text.find_first_of("\t\n\r") != std::string::npos) {
    violated("clean_text contains tab or newline");
  }
  if ((r.label == Label::kUnlabeled) != (r.label_source == LabelSource::kNone)) {
    violated("label/label_source mismatch");
  }
  if (r.pool == Pool::kSynthetic && r.label_source != LabelSource::kCounterfactual) {
    violated("synthetic record without counterfactual provenance");
  }
  if (r.age && *r.age < 0) violated("negative age");
}

void FilterRuleSet::validate() const {
  if (include_terms.empty()) {
    fail(ErrorCode::kConfig, "filter rules: include_terms is empty");
  }
  for (const auto& t : include_terms) {
    if (t.empty() || t != text::to_lower(t)) {
      fail(ErrorCode::kConfig, "filter rules: include term '" + t +
                                   "' must be non-empty lowercase");
    }
  }
  for (const auto& p : exclude_phrases) {
    if (p.empty() || p != text::to_lower(p)) {
      fail(ErrorCode::kConfig, "filter rules: exclude phrase '" + p +
                                   "' must be non-empty lowercase");
    }
  }
  if (min_length < 1) fail(ErrorCode::kConfig, "filter rules: min_length < 1");
}

FilterRuleSet FilterRuleSet::starter() {
  FilterRuleSet rules;
  rules.version = "starter-1";
  rules.include_terms = {
      // generic stems
      "vacc", "vax", "immunis", "immuniz",
      // brands in use in Australia
      "pfizer", "moderna", "astrazeneca", "comirnaty", "spikevax", "novavax",
      "fluad", "fluarix", "influvac", "afluria", "boostrix", "infanrix",
      "priorix", "gardasil", "shingrix", "prevenar", "bexsero", "nimenrix",
      // vaccine-preventable diseases that appear as product shorthand
      "mmr", "dtpa", "hpv", "rabies", "pertussis", "rotavirus", "meningococcal",
      "chicken pox vaccine", "flu vaccine"};
  rules.exclude_phrases = {
      "fully vaxed",      "triple vaxed",          "double vaxed",
      "covid vaccinated", "fully vaccinated",      "vaccinations up to date",
      "vaccines up to date", "immunisations up to date", "immunisations utd",
      "vaccinations utd"};
  rules.min_length = 3;
  return rules;
}

std::string sex_word(Sex sex) {
  switch (sex) {
    case Sex::kMale: return "male";
    case Sex::kFemale: return "female";
    case Sex::kUnknown: return "unk";
  }
  return "unk";
}

TriageRecord preprocess(TriageRecord record,
                        std::span<const std::string> strip_patterns) {
  if (record.raw_text.empty()) {
    fail(ErrorCode::kInvalidArgument, "record " + record.id + ": raw_text is empty");
  }
  std::string body = text::to_lower(record.raw_text);
  for (const auto& pattern : strip_patterns) {
    const std::string needle = text::to_lower(pattern);
    if (needle.empty()) continue;
    for (size_t pos = body.find(needle); pos != std::string::npos;
         pos = body.find(needle, pos)) {
      body.replace(pos, needle.size(), " ");
    }
  }
  body = text::collapse_whitespace(body);
  if (body.empty()) {
    fail(ErrorCode::kEmptyAfterStrip,
         "record " + record.id + ": nothing left after stripping");
  }
  const std::string age = record.age ? std::to_string(*record.age) : "unk";
  record.clean_text = age + " " + sex_word(record.sex) + " " + body;
  return record;
}

std::vector<std::pair<size_t, size_t>> include_matches(
    std::string_view text, const FilterRuleSet& rules) {
  std::vector<std::pair<size_t, size_t>> hits;
  for (const auto& term : rules.include_terms) {
    if (term.empty()) continue;
    for (size_t pos = text.find(term); pos != std::string_view::npos;
         pos = text.find(term, pos + 1)) {
      hits.emplace_back(pos, term.size());
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

bool contains_include_term(std::string_view text, const FilterRuleSet& rules) {
  for (const auto& term : rules.include_terms) {
    if (!term.empty() && text.find(term) != std::string_view::npos) return true;
  }
  return false;
}

FilterVerdict classify_text(std::string_view clean_text,
                            const FilterRuleSet& rules) {
  if (clean_text.size() < rules.min_length) return FilterVerdict::kTooShort;
  const auto hits = include_matches(clean_text, rules);
  if (hits.empty()) return FilterVerdict::kNoIncludeTerm;

  // Deleting exclusion phrases is modelled as masking the characters they
  // cover; an include hit survives only if it touches no masked character.
  std::vector<bool> masked(clean_text.size(), false);
  for (const auto& phrase : rules.exclude_phrases) {
    if (phrase.empty()) continue;
    for (size_t pos = clean_text.find(phrase); pos != std::string_view::npos;
         pos = clean_text.find(phrase, pos + 1)) {
      std::fill(masked.begin() + pos, masked.begin() + pos + phrase.size(), true);
    }
  }
  for (const auto& [pos, len] : hits) {
    if (std::none_of(masked.begin() + pos, masked.begin() + pos + len,
                     [](bool m) { return m; })) {
      return FilterVerdict::kRetained;
    }
  }
  return FilterVerdict::kExcludedOnly;
}

FilterResult keyword_filter(std::span<const TriageRecord> records,
                            const FilterRuleSet& rules) {
  FilterResult result;
  for (const auto& r : records) {
    const FilterVerdict verdict = classify_text(r.clean_text, rules);
    if (verdict == FilterVerdict::kRetained) {
      result.retained.push_back(r);
    } else {
      result.rejected.push_back(r);
      result.rejection_reasons.push_back(verdict);
    }
  }
  return result;
}

bool pattern_match_text(std::string_view clean_text, const FilterRuleSet& rules) {
  return classify_text(clean_text, rules) == FilterVerdict::kRetained;
}

bool pattern_match(const TriageRecord& record, const FilterRuleSet& rules) {
  return pattern_match_text(record.clean_text, rules);
}

void to_json(nlohmann::json& j, const TriageRecord& r) {
  j = nlohmann::json{{"id", r.id},
                     {"raw_text", r.raw_text},
                     {"clean_text", r.clean_text},
                     {"age", r.age ? nlohmann::json(*r.age) : nlohmann::json()},
                     {"sex", to_string(r.sex)},
                     {"site", r.site ? nlohmann::json(*r.site) : nlohmann::json()},
                     {"timestamp", r.timestamp ? nlohmann::json(*r.timestamp)
                                               : nlohmann::json()},
                     {"pool", to_string(r.pool)},
                     {"label", to_string(r.label)},
                     {"label_source", to_string(r.label_source)}};
}

void from_json(const nlohmann::json& j, TriageRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.raw_text = j.value("raw_text", std::string());
  r.clean_text = j.value("clean_text", std::string());
  r.age = j.contains("age") && !j["age"].is_null()
              ? std::optional<int>(j["age"].get<int>())
              : std::nullopt;
  r.sex = parse_sex(j.value("sex", std::string("unknown")));
  r.site = j.contains("site") && !j["site"].is_null()
               ? std::optional<std::string>(j["site"].get<std::string>())
               : std::nullopt;
  r.timestamp = j.contains("timestamp") && !j["timestamp"].is_null()
                    ? std::optional<std::string>(j["timestamp"].get<std::string>())
                    : std::nullopt;
  r.pool = parse_pool(j.value("pool", std::string("focused")));
  r.label = parse_label(j.value("label", std::string("unlabeled")));
  r.label_source = parse_label_source(j.value("label_source", std::string("none")));
}

void to_json(nlohmann::json& j, const FilterRuleSet& r) {
  j = nlohmann::json{{"version", r.version},
                     {"include_terms", r.include_terms},
                     {"exclude_phrases", r.exclude_phrases},
                     {"min_length", r.min_length}};
}

void from_json(const nlohmann::json& j, FilterRuleSet& r) {
  r.version = j.value("version", std::string("custom"));
  r.include_terms = j.at("include_terms").get<std::vector<std::string>>();
  r.exclude_phrases = j.value("exclude_phrases", std::vector<std::string>{});
  r.min_length = j.value("min_length", size_t{3});
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<nlohmann::json> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path,
                 std::span<const nlohmann::json> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& row : rows) out << row.dump() << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp);
    out << doc.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::vector<TriageRecord> read_records(const std::filesystem::path& path) {
  std::vector<TriageRecord> records;
  for (const auto& row : read_jsonl(path)) records.push_back(row.get<TriageRecord>());
  return records;
}

void write_records(const std::filesystem::path& path,
                   std::span<const TriageRecord> records) {
  std::vector<nlohmann::json> rows(records.begin(), records.end());
  write_jsonl(path, rows);
}

void write_rejections(const std::filesystem::path& path,
                      const FilterResult& result) {
  std::vector<nlohmann::json> rows;
  for (size_t i = 0; i < result.rejected.size(); ++i) {
    nlohmann::json row = result.rejected[i];
    row["rejection_reason"] = to_string(result.rejection_reasons[i]);
    rows.push_back(std::move(row));
  }
  write_jsonl(path, rows);
}

}  // namespace triage
