#include "triage/augment.h"

#include <cmath>

#include "triage/error.h"
#include "triage/text.h"

namespace triage {

namespace {

std::string normalize_span(std::string_view span) {
  return text::collapse_whitespace(text::to_lower(span));
}

TriageRecord make_synthetic(const TriageRecord& source, std::string text, std::string id) {
  TriageRecord r = source;
  r.id = std::move(id);
  r.raw_text = text;
  r.clean_text = std::move(text);
  r.pool = Pool::kSynthetic;
  r.label = flip(source.label);
  r.label_source = LabelSource::kCounterfactual;
  return r;
}

}  // namespace

std::string_view to_string(FlipDirection d) {
  return d == FlipDirection::kToNegative ? "to_negative" : "to_positive";
}

std::string_view to_string(EditKind k) {
  return k == EditKind::kRemoval ? "removal" : "insertion";
}

FlipDirection parse_direction(std::string_view s) {
  if (s == "to_negative") return FlipDirection::kToNegative;
  if (s == "to_positive") return FlipDirection::kToPositive;
  fail(ErrorCode::kInvalidArgument, "unknown flip direction '" + std::string(s) + "'");
}

void to_json(nlohmann::json& j, const CounterfactualPair& p) {
  j = nlohmann::json{{"source_id", p.source_id}, {"synthetic_id", p.synthetic_id},
                     {"direction", to_string(p.direction)}, {"edit_span", p.edit_span},
                     {"edit_kind", to_string(p.edit_kind)}, {"round", p.round},
                     {"offset", p.offset}, {"edit_text", p.edit_text}, {"split", p.split}};
}

void from_json(const nlohmann::json& j, CounterfactualPair& p) {
  p.source_id = j.at("source_id").get<std::string>();
  p.synthetic_id = j.at("synthetic_id").get<std::string>();
  p.direction = parse_direction(j.at("direction").get<std::string>());
  p.edit_span = j.at("edit_span").get<std::string>();
  p.edit_kind = j.at("edit_kind").get<std::string>() == "removal" ? EditKind::kRemoval
                                                                  : EditKind::kInsertion;
  p.round = j.value("round", 0);
  p.offset = j.at("offset").get<size_t>();
  p.edit_text = j.at("edit_text").get<std::string>();
  p.split = j.value("split", std::string("train"));
}

FlipResult flip_to_negative(const TriageRecord& source, std::string_view span_in,
                            const FilterRuleSet& rules, int round, std::string synthetic_id) {
  if (source.label != Label::kPositive) {
    fail(ErrorCode::kInvalidArgument, "flip_to_negative: " + source.id + " is not labeled positive");
  }
  const std::string span = normalize_span(span_in);
  const std::string& src = source.clean_text;
  const size_t hits = text::count_occurrences(src, span);
  if (span.empty() || hits == 0) {
    fail(ErrorCode::kSpanNotFound, "span '" + span + "' not found in " + source.id);
  }
  if (hits > 1) {
    fail(ErrorCode::kAmbiguousSpan, "span '" + span + "' occurs " + std::to_string(hits) +
                                        " times in " + source.id);
  }
  size_t begin = src.find(span);
  size_t end = begin + span.size();
  if (begin > 0 && src[begin - 1] == ' ') {
    --begin;
  } else if (end < src.size() && src[end] == ' ') {
    ++end;
  }
  std::string residual = src.substr(0, begin) + src.substr(end);
  if (text::collapse_whitespace(residual).empty()) {
    fail(ErrorCode::kEmptyResidual, "removing the span leaves " + source.id + " empty");
  }
  if (!contains_include_term(span, rules)) {
    fail(ErrorCode::kSpanLacksSignal, "span '" + span + "' carries no include term");
  }
  FlipResult out;
  out.pair.source_id = source.id;
  out.pair.synthetic_id = synthetic_id;
  out.pair.direction = FlipDirection::kToNegative;
  out.pair.edit_span = span;
  out.pair.edit_kind = EditKind::kRemoval;
  out.pair.round = round;
  out.pair.offset = begin;
  out.pair.edit_text = src.substr(begin, end - begin);
  out.synthetic = make_synthetic(source, std::move(residual), std::move(synthetic_id));
  return out;
}

FlipResult flip_to_positive(const TriageRecord& source, std::string_view span_in,
                            size_t position, const FilterRuleSet& rules, int round,
                            std::string synthetic_id) {
  if (source.label != Label::kNegative) {
    fail(ErrorCode::kInvalidArgument, "flip_to_positive: " + source.id + " is not labeled negative");
  }
  const std::string span = normalize_span(span_in);
  if (span.empty() || !contains_include_term(span, rules)) {
    fail(ErrorCode::kSpanLacksSignal, "span '" + span + "' carries no include term");
  }
  const std::string& src = source.clean_text;
  // Byte offsets of token starts; clean text is whitespace-collapsed.
  std::vector<size_t> starts;
  for (size_t i = 0; i < src.size(); ++i) {
    if (src[i] != ' ' && (i == 0 || src[i - 1] == ' ')) starts.push_back(i);
  }
  if (position > starts.size()) {
    fail(ErrorCode::kPositionOutOfBounds, "position " + std::to_string(position) +
                                              " outside 0.." + std::to_string(starts.size()));
  }
  FlipResult out;
  out.pair.source_id = source.id;
  out.pair.synthetic_id = synthetic_id;
  out.pair.direction = FlipDirection::kToPositive;
  out.pair.edit_span = span;
  out.pair.edit_kind = EditKind::kInsertion;
  out.pair.round = round;
  if (position < starts.size()) {
    out.pair.offset = starts[position];
    out.pair.edit_text = span + " ";
  } else {
    out.pair.offset = src.size();
    out.pair.edit_text = src.empty() ? span : " " + span;
  }
  std::string edited = src;
  edited.insert(out.pair.offset, out.pair.edit_text);
  out.synthetic = make_synthetic(source, std::move(edited), std::move(synthetic_id));
  return out;
}

std::string invert_edit(const CounterfactualPair& pair, std::string_view synthetic_text) {
  std::string out(synthetic_text);
  if (pair.edit_kind == EditKind::kRemoval) {
    if (pair.offset > out.size()) {
      fail(ErrorCode::kInvariantViolation, "invert_edit: offset beyond synthetic text");
    }
    out.insert(pair.offset, pair.edit_text);
  } else {
    if (out.compare(pair.offset, pair.edit_text.size(), pair.edit_text) != 0) {
      fail(ErrorCode::kInvariantViolation, "invert_edit: inserted text not found at offset");
    }
    out.erase(pair.offset, pair.edit_text.size());
  }
  return out;
}

std::string apply_edit(const CounterfactualPair& pair, std::string_view source_text) {
  CounterfactualPair inverse = pair;
  inverse.edit_kind =
      pair.edit_kind == EditKind::kRemoval ? EditKind::kInsertion : EditKind::kRemoval;
  return invert_edit(inverse, source_text);
}

CounterfactualLedger::CounterfactualLedger(const CounterfactualLedger& other) {
  std::lock_guard lock(other.mu_);
  pairs_ = other.pairs_;
  by_synthetic_ = other.by_synthetic_;
}

CounterfactualLedger& CounterfactualLedger::operator=(const CounterfactualLedger& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  pairs_ = other.pairs_;
  by_synthetic_ = other.by_synthetic_;
  return *this;
}

void CounterfactualLedger::add(const CounterfactualPair& pair) {
  std::lock_guard lock(mu_);
  if (by_synthetic_.contains(pair.synthetic_id)) {
    fail(ErrorCode::kInvalidArgument, "ledger already holds " + pair.synthetic_id);
  }
  by_synthetic_[pair.synthetic_id] = pairs_.size();
  pairs_.push_back(pair);
}

std::vector<CounterfactualPair> CounterfactualLedger::pairs() const {
  std::lock_guard lock(mu_);
  return pairs_;
}

bool CounterfactualLedger::is_synthetic(const std::string& id) const {
  std::lock_guard lock(mu_);
  return by_synthetic_.contains(id);
}

const CounterfactualPair* CounterfactualLedger::find(const std::string& synthetic_id) const {
  std::lock_guard lock(mu_);
  const auto it = by_synthetic_.find(synthetic_id);
  return it == by_synthetic_.end() ? nullptr : &pairs_[it->second];
}

size_t CounterfactualLedger::size() const {
  std::lock_guard lock(mu_);
  return pairs_.size();
}

void CounterfactualLedger::check_complete(std::span<const TriageRecord> records) const {
  std::lock_guard lock(mu_);
  for (const auto& r : records) {
    if (r.pool == Pool::kSynthetic && !by_synthetic_.contains(r.id)) {
      fail(ErrorCode::kInvariantViolation, "synthetic record " + r.id + " has no ledger entry");
    }
  }
}

void CounterfactualLedger::save(const std::filesystem::path& path) const {
  const auto rows = pairs();
  std::vector<nlohmann::json> json_rows(rows.begin(), rows.end());
  write_jsonl(path, json_rows);
}

CounterfactualLedger CounterfactualLedger::load(const std::filesystem::path& path) {
  CounterfactualLedger ledger;
  for (const auto& row : read_jsonl(path)) ledger.add(row.get<CounterfactualPair>());
  return ledger;
}

double synthetic_fraction(std::span<const std::string> ids, const CounterfactualLedger& ledger) {
  if (ids.empty()) return 0.0;
  size_t synthetic = 0;
  for (const auto& id : ids) {
    if (ledger.is_synthetic(id)) ++synthetic;
  }
  return static_cast<double>(synthetic) / static_cast<double>(ids.size());
}

int synthetic_percent(double fraction) {
  return static_cast<int>(std::floor(fraction * 100.0 + 1e-9));
}

}  // namespace triage
