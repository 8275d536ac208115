#include "triage/loop.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "triage/error.h"

namespace triage {

std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "validation"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  fail(ErrorCode::kInvalidArgument, "unknown split '" + std::string(s) + "'");
}

void to_json(nlohmann::json& j, const Candidate& c) {
  j = nlohmann::json{{"id", c.id}, {"label", to_string(c.label)}, {"split", to_string(c.split)},
                     {"priority", c.priority}, {"synthetic", c.synthetic}};
}

void from_json(const nlohmann::json& j, Candidate& c) {
  c.id = j.at("id").get<std::string>();
  c.label = parse_label(j.at("label").get<std::string>());
  c.split = parse_split(j.at("split").get<std::string>());
  c.priority = j.at("priority").get<double>();
  c.synthetic = j.value("synthetic", false);
}

namespace {

SplitCounts count(const std::map<std::string, Label>& split, const std::set<std::string>& synthetic) {
  SplitCounts c;
  for (const auto& [id, label] : split) {
    if (label == Label::kPositive) {
      ++c.positive;
    } else {
      ++c.negative;
    }
    if (synthetic.contains(id)) ++c.synthetic;
  }
  return c;
}

nlohmann::json label_map(const std::map<std::string, Label>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, label] : m) j[id] = to_string(label);
  return j;
}

std::map<std::string, Label> parse_label_map(const nlohmann::json& j) {
  std::map<std::string, Label> m;
  for (const auto& [id, label] : j.items()) m.emplace(id, parse_label(label.get<std::string>()));
  return m;
}

void check_candidate(const Candidate& c) {
  if (c.label != Label::kPositive && c.label != Label::kNegative) {
    fail(ErrorCode::kInvalidArgument, "candidate " + c.id + " is unlabeled");
  }
}

bool higher_priority(const Candidate& a, const Candidate& b) {
  if (a.priority != b.priority) return a.priority > b.priority;
  return a.id < b.id;
}

}  // namespace

SplitCounts LabeledDataset::train_counts() const { return count(train, synthetic_ids); }

SplitCounts LabeledDataset::validation_counts() const {
  return count(validation, synthetic_ids);
}

std::set<std::string> LabeledDataset::all_ids() const {
  std::set<std::string> ids;
  for (const auto& [id, l] : train) ids.insert(id);
  for (const auto& [id, l] : validation) ids.insert(id);
  return ids;
}

void LabeledDataset::check_invariants(double ratio_cap) const {
  for (const auto& [id, l] : train) {
    if (validation.contains(id)) {
      fail(ErrorCode::kInvariantViolation,
           "dataset v" + std::to_string(version) + ": " + id + " in both train and validation");
    }
  }
  const auto c = train_counts();
  if (static_cast<double>(c.negative) > ratio_cap * static_cast<double>(c.positive)) {
    fail(ErrorCode::kInvariantViolation,
         "dataset v" + std::to_string(version) + ": " + std::to_string(c.negative) +
             " negatives exceed the cap for " + std::to_string(c.positive) + " positives");
  }
}

void to_json(nlohmann::json& j, const LabeledDataset& d) {
  const auto tc = d.train_counts();
  const auto vc = d.validation_counts();
  j = nlohmann::json{
      {"version", d.version},
      {"parent_version", d.parent_version ? nlohmann::json(*d.parent_version) : nlohmann::json()},
      {"train", label_map(d.train)},
      {"validation", label_map(d.validation)},
      {"synthetic_ids", d.synthetic_ids},
      {"holdover", d.holdover},
      {"counts",
       {{"train", {{"positive", tc.positive}, {"negative", tc.negative}, {"synthetic", tc.synthetic}}},
        {"validation",
         {{"positive", vc.positive}, {"negative", vc.negative}, {"synthetic", vc.synthetic}}}}},
      {"synthetic_fraction",
       {{"train", tc.synthetic_fraction()}, {"validation", vc.synthetic_fraction()}}}};
}

void from_json(const nlohmann::json& j, LabeledDataset& d) {
  d.version = j.at("version").get<int>();
  d.parent_version.reset();
  if (!j.at("parent_version").is_null()) d.parent_version = j.at("parent_version").get<int>();
  d.train = parse_label_map(j.at("train"));
  d.validation = parse_label_map(j.at("validation"));
  d.synthetic_ids = j.at("synthetic_ids").get<std::set<std::string>>();
  d.holdover = j.at("holdover").get<std::vector<Candidate>>();
}

LabeledDataset make_seed_dataset(std::span<const Candidate> candidates) {
  LabeledDataset d;
  d.version = 1;
  for (const auto& c : candidates) {
    check_candidate(c);
    auto& split = c.split == Split::kTrain ? d.train : d.validation;
    split[c.id] = c.label;
    if (c.synthetic) d.synthetic_ids.insert(c.id);
  }
  d.check_invariants(INFINITY);
  return d;
}

LabeledDataset expand_dataset(const LabeledDataset& current,
                              std::span<const Candidate> candidates, double ratio_cap) {
  if (!(ratio_cap > 0.0)) fail(ErrorCode::kInvalidArgument, "ratio_cap must be positive");
  LabeledDataset next = current;
  next.version = current.version + 1;
  next.parent_version = current.version;
  next.holdover.clear();

  const auto existing = current.all_ids();
  std::set<std::string> seen;
  std::vector<Candidate> negatives = current.holdover;
  for (const auto& c : candidates) {
    check_candidate(c);
    if (existing.contains(c.id) || !seen.insert(c.id).second) {
      fail(ErrorCode::kInvalidArgument, "candidate " + c.id + " is already in the dataset");
    }
    if (c.synthetic) next.synthetic_ids.insert(c.id);
    if (c.split == Split::kValidation) {
      next.validation[c.id] = c.label;
    } else if (c.label == Label::kPositive) {
      next.train[c.id] = c.label;
    } else {
      negatives.push_back(c);
    }
  }

  auto counts = next.train_counts();
  if (counts.positive == 0) {
    fail(ErrorCode::kRatioUnreachable, "no training positives to balance negatives against");
  }
  std::stable_sort(negatives.begin(), negatives.end(), higher_priority);
  const auto room = static_cast<size_t>(std::floor(ratio_cap * static_cast<double>(counts.positive)));
  size_t admitted = counts.negative;
  for (auto& c : negatives) {
    if (admitted < room) {
      next.train[c.id] = Label::kNegative;
      ++admitted;
    } else {
      next.holdover.push_back(std::move(c));
    }
  }
  next.check_invariants(ratio_cap);
  return next;
}

namespace {

constexpr std::array<std::string_view, 7> kPhaseNames = {
    "training", "checkpoint_eval", "pool_predict", "queue_build", "labeling", "expand", "complete"};

}  // namespace

std::string_view to_string(Phase p) { return kPhaseNames[static_cast<size_t>(p)]; }

Phase parse_phase(std::string_view s) {
  for (size_t i = 0; i < kPhaseNames.size(); ++i) {
    if (kPhaseNames[i] == s) return static_cast<Phase>(i);
  }
  fail(ErrorCode::kInvalidArgument, "unknown phase '" + std::string(s) + "'");
}

bool can_transition(Phase from, Phase to) {
  return from != Phase::kComplete && static_cast<int>(to) == static_cast<int>(from) + 1;
}

Phase next_phase(Phase p) {
  if (p == Phase::kComplete) fail(ErrorCode::kInvalidPhase, "round already complete");
  return static_cast<Phase>(static_cast<int>(p) + 1);
}

std::string_view to_string(TrainMode m) {
  return m == TrainMode::kFromScratch ? "from_scratch" : "resume_best";
}

TrainMode parse_mode(std::string_view s) {
  if (s == "from_scratch") return TrainMode::kFromScratch;
  if (s == "resume_best") return TrainMode::kResumeBest;
  fail(ErrorCode::kInvalidArgument, "unknown training mode '" + std::string(s) + "'");
}

std::vector<std::string> RoundState::selected_checkpoints() const {
  std::vector<std::string> out;
  for (const auto& l : lineages) out.insert(out.end(), l.selected_ids.begin(), l.selected_ids.end());
  return out;
}

std::vector<std::string> RoundState::checkpoint_ids() const {
  std::vector<std::string> out;
  for (const auto& l : lineages) {
    out.insert(out.end(), l.checkpoint_ids.begin(), l.checkpoint_ids.end());
  }
  return out;
}

bool RoundState::trained() const {
  return !lineages.empty() &&
         std::all_of(lineages.begin(), lineages.end(), [](const Lineage& l) { return l.trained; });
}

void to_json(nlohmann::json& j, const Lineage& l) {
  j = nlohmann::json{{"mode", to_string(l.mode)},
                     {"parent_checkpoint", l.parent_checkpoint ? nlohmann::json(*l.parent_checkpoint)
                                                               : nlohmann::json()},
                     {"checkpoint_ids", l.checkpoint_ids},
                     {"selected_ids", l.selected_ids},
                     {"trained", l.trained}};
}

void from_json(const nlohmann::json& j, Lineage& l) {
  l.mode = parse_mode(j.at("mode").get<std::string>());
  l.parent_checkpoint.reset();
  if (!j.at("parent_checkpoint").is_null()) {
    l.parent_checkpoint = j.at("parent_checkpoint").get<std::string>();
  }
  l.checkpoint_ids = j.at("checkpoint_ids").get<std::vector<std::string>>();
  l.selected_ids = j.at("selected_ids").get<std::vector<std::string>>();
  l.trained = j.at("trained").get<bool>();
}

void to_json(nlohmann::json& j, const RoundState& r) {
  j = nlohmann::json{
      {"round", r.round},
      {"phase", to_string(r.phase)},
      {"dataset_version", r.dataset_version},
      {"lineages", r.lineages},
      {"checkpoint_ids", r.checkpoint_ids()},
      {"batch_ids", r.batch_ids},
      {"representative", r.representative ? nlohmann::json(*r.representative) : nlohmann::json()},
      {"next_dataset_version",
       r.next_dataset_version ? nlohmann::json(*r.next_dataset_version) : nlohmann::json()},
      {"report", r.report ? nlohmann::json(*r.report) : nlohmann::json()}};
}

void from_json(const nlohmann::json& j, RoundState& r) {
  r.round = j.at("round").get<int>();
  r.phase = parse_phase(j.at("phase").get<std::string>());
  r.dataset_version = j.at("dataset_version").get<int>();
  r.lineages = j.at("lineages").get<std::vector<Lineage>>();
  r.batch_ids = j.at("batch_ids").get<std::vector<std::string>>();
  r.representative.reset();
  if (!j.at("representative").is_null()) r.representative = j.at("representative").get<std::string>();
  r.next_dataset_version.reset();
  if (!j.at("next_dataset_version").is_null()) {
    r.next_dataset_version = j.at("next_dataset_version").get<int>();
  }
  r.report.reset();
  if (!j.at("report").is_null()) r.report = j.at("report").get<ReportRow>();
}

}  // namespace triage
