#include "triage/pipeline.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

#include "triage/error.h"
#include "triage/rng.h"
#include "triage/text.h"

namespace triage {

void to_json(nlohmann::json& j, const RoundCheck& c) {
  j = nlohmann::json{{"round", c.round},
                     {"dataset_version", c.dataset_version},
                     {"train", {{"positive", c.train.positive}, {"negative", c.train.negative},
                                {"synthetic", c.train.synthetic}}},
                     {"validation", {{"positive", c.validation.positive},
                                     {"negative", c.validation.negative},
                                     {"synthetic", c.validation.synthetic}}},
                     {"evaluation_size", c.evaluation_size},
                     {"new_false_positives", c.new_false_positives},
                     {"ratio_ok", c.ratio_ok},
                     {"disjoint", c.disjoint}};
}

SyntheticCorpus materialize_corpus(const ProjectConfig& config, const std::filesystem::path& dir) {
  const auto folder = dir / "corpus";
  std::filesystem::create_directories(folder);
  SyntheticCorpus corpus;
  if (config.corpus.kind == "synthetic") {
    corpus = generate(config.corpus.synth);
  } else {
    corpus.focused = read_records(*config.corpus.focused);
    corpus.deployment = read_records(*config.corpus.deployment);
    if (!config.corpus.oracle_key) fail(ErrorCode::kConfig, "corpus.oracle_key is required for scripted runs");
    corpus.key = read_oracle_key(*config.corpus.oracle_key);
  }
  write_records(folder / "focused.jsonl", corpus.focused);
  write_records(folder / "deployment.jsonl", corpus.deployment);
  write_oracle_key(folder / "oracle_key.json", corpus.key);
  return corpus;
}

size_t label_pending(Project& project, const SimulatedOracle& oracle) {
  size_t n = 0;
  for (const auto& id : project.pending_records()) {
    project.submit_label(id, oracle.label(id), oracle.identity());
    ++n;
  }
  return n;
}

size_t author_scripted_counterfactuals(Project& project, const SimulatedOracle& oracle, int round) {
  const auto& loop = project.config().loop;
  const size_t want_negative = loop.counterfactual_negative_count(round);
  const size_t want_positive = loop.counterfactual_positive_count(round);
  if (want_negative == 0 && want_positive == 0) return 0;
  const ProjectState s = project.state();
  const auto* data = s.latest_dataset();
  if (data == nullptr) return 0;
  std::set<std::string> used;
  for (const auto& p : s.ledger.pairs()) used.insert(p.source_id);
  const auto& rules = project.config().rules;

  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  for (const auto& [id, label] : data->train) {
    if (data->synthetic_ids.contains(id) || used.contains(id) || s.evaluation.contains(id)) continue;
    (label == Label::kPositive ? positives : negatives).push_back(id);
  }
  const uint64_t salt = loop.seed + static_cast<uint64_t>(round);
  auto by_hash = [salt](const std::string& a, const std::string& b) {
    const auto ha = stable_hash(a, salt);
    const auto hb = stable_hash(b, salt);
    return ha != hb ? ha < hb : a < b;
  };
  std::sort(positives.begin(), positives.end(), by_hash);
  std::sort(negatives.begin(), negatives.end(), by_hash);

  std::vector<std::string> spans;
  for (const auto& id : positives) {
    const auto& entry = oracle.entry(id);
    if (!entry.signal_span) continue;
    const auto span = text::collapse_whitespace(text::to_lower(*entry.signal_span));
    if (contains_include_term(span, rules)) spans.push_back(span);
  }

  size_t made = 0;
  size_t flipped_negative = 0;
  for (const auto& id : positives) {
    if (flipped_negative >= want_negative) break;
    const auto& entry = oracle.entry(id);
    if (!entry.signal_span) continue;
    try {
      project.author_counterfactual(id, FlipDirection::kToNegative, *entry.signal_span, std::nullopt,
                                    oracle.identity());
      ++flipped_negative;
      ++made;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSpanNotFound && e.code() != ErrorCode::kAmbiguousSpan &&
          e.code() != ErrorCode::kEmptyResidual && e.code() != ErrorCode::kSpanLacksSignal) {
        throw;
      }
    }
  }
  if (spans.empty()) return made;
  size_t flipped_positive = 0;
  for (size_t i = 0; i < negatives.size() && flipped_positive < want_positive; ++i) {
    const auto& id = negatives[i];
    const auto record = project.find_record(id);
    if (!record) continue;
    const size_t position = std::min<size_t>(2, text::split_whitespace(record->clean_text).size());
    project.author_counterfactual(id, FlipDirection::kToPositive, spans[i % spans.size()], position,
                                  oracle.identity());
    ++flipped_positive;
    ++made;
  }
  return made;
}

namespace {

void say(std::ostream* log, const std::string& line) {
  if (log != nullptr) *log << line << '\n' << std::flush;
}

size_t new_false_positives(const ProjectState& s, const RoundState& r) {
  size_t n = 0;
  for (const auto& bid : r.batch_ids) {
    const auto& b = s.batches.at(bid);
    if (b.strategy != Strategy::kPositivePrediction) continue;
    for (const auto& id : b.record_ids) {
      if (s.final_label(id) == Label::kNegative) ++n;
    }
  }
  return n;
}

}  // namespace

PipelineResult run_pipeline(const ProjectConfig& config, std::ostream* log) {
  const auto started = std::chrono::steady_clock::now();
  PipelineResult result;
  result.dir = config.project_dir;
  config.validate();

  std::filesystem::create_directories(config.project_dir);
  const SyntheticCorpus corpus = materialize_corpus(config, config.project_dir);
  const SimulatedOracle oracle(corpus.key, config.oracle.noise_rate, config.oracle.seed, config.oracle.id);

  auto project = Project::create(config);
  DirectoryLock lock(config.project_dir);
  project->load_corpus(corpus.focused, corpus.deployment);
  say(log, "corpus: " + std::to_string(project->pool_records(Pool::kFocused).size()) + " focused, " +
               std::to_string(project->pool_records(Pool::kDeployment).size()) + " deployment");
  project->build_topics([&](const TriageRecord& r) { return oracle.label(r.id) == Label::kPositive; });
  const auto seed = project->create_seed_batch();
  label_pending(*project, oracle);
  const auto& seed_data = project->create_seed_dataset();
  say(log, "seed: " + std::to_string(seed.record_ids.size()) + " labeled, train " +
               std::to_string(seed_data.train_counts().positive) + "+/" +
               std::to_string(seed_data.train_counts().negative) + "-");

  size_t previous_train = seed_data.train_counts().total();
  for (int round = 1; round <= config.loop.rounds; ++round) {
    std::vector<TrainMode> modes{TrainMode::kFromScratch};
    if (std::find(config.loop.resume_rounds.begin(), config.loop.resume_rounds.end(), round) !=
        config.loop.resume_rounds.end()) {
      modes.push_back(TrainMode::kResumeBest);
    }
    project->start_round(modes);
    project->run_training(round);
    for (int i = 0; i < 4; ++i) project->advance(round);
    const size_t labeled = label_pending(*project, oracle);
    project->advance(round);
    const size_t authored = author_scripted_counterfactuals(*project, oracle, round);
    const RoundState done = project->advance(round);

    const ProjectState s = project->state();
    const auto& data = s.datasets.at(*done.next_dataset_version);
    RoundCheck check;
    check.round = round;
    check.dataset_version = data.version;
    check.train = data.train_counts();
    check.validation = data.validation_counts();
    check.evaluation_size = s.evaluation.size();
    check.new_false_positives = new_false_positives(s, done);
    check.ratio_ok = static_cast<double>(check.train.negative) <=
                     config.loop.ratio_cap * static_cast<double>(check.train.positive) + 1e-9;
    try {
      assert_disjoint(s.evaluation, s.dataset_ids());
      check.disjoint = true;
    } catch (const Error&) {
      check.disjoint = false;
    }
    const std::string tag = "round " + std::to_string(round) + ": ";
    if (!check.ratio_ok) result.violations.push_back(tag + "ratio cap exceeded");
    if (!check.disjoint) result.violations.push_back(tag + "evaluation set overlaps a dataset");
    if (check.train.total() <= previous_train) result.violations.push_back(tag + "train set did not grow");
    previous_train = check.train.total();
    result.rounds.push_back(check);
    say(log, tag + std::to_string(labeled) + " labeled, " + std::to_string(authored) +
                 " counterfactuals, train " + std::to_string(check.train.positive) + "+/" +
                 std::to_string(check.train.negative) + "-, evaluation " +
                 std::to_string(check.evaluation_size) + ", new FP " +
                 std::to_string(check.new_false_positives));
    if (config.loop.stop_new_fp_below && check.new_false_positives < *config.loop.stop_new_fp_below &&
        round < config.loop.rounds) {
      result.stopped_early = true;
      say(log, tag + "stopping, too few new false positives");
      break;
    }
  }

  result.rows = project->report_rows(kReportBeta);
  result.report = project->final_report(kReportBeta);
  result.report["checks"] = result.rounds;
  write_json(config.project_dir / "reports" / "final.json", result.report);
  {
    std::ofstream out(config.project_dir / "reports" / "final.txt");
    out << format_table(result.rows);
  }

  const auto events = project->events();
  const auto replayed = state_to_json(replay(events));
  result.replay_identical = replayed == project->state_json();
  if (!result.replay_identical) result.violations.push_back("replayed state differs from live state");
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  say(log, format_table(result.rows));
  return result;
}

}  // namespace triage
