#include "triage/project.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <ctime>

#include "triage/error.h"
#include "triage/rng.h"

namespace triage {

namespace {

constexpr uint64_t kSeedSplitSalt = 0x5eed5eedULL;
constexpr uint64_t kValidationSalt = 0x7a11da7eULL;
constexpr uint64_t kEvaluationSalt = 0xe7a1e7a1ULL;
constexpr uint64_t kExposureSalt = 0xe9905edULL;

std::string hex_digest(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_hash(text)));
  return buf;
}

template <typename T>
nlohmann::json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

}  // namespace

const LabelVote* LabelState::vote_of(const std::string& oracle_id) const {
  for (const auto& v : votes) {
    if (v.oracle_id == oracle_id && !v.adjudication) return &v;
  }
  return nullptr;
}

void to_json(nlohmann::json& j, const PredictionRef& p) {
  j = nlohmann::json{{"round", p.round},       {"checkpoint_id", p.checkpoint_id},
                     {"pool", to_string(p.pool)}, {"path", p.path},
                     {"count", p.count},       {"digest", p.digest}};
}

void from_json(const nlohmann::json& j, PredictionRef& p) {
  p.round = j.at("round").get<int>();
  p.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  p.pool = parse_pool(j.at("pool").get<std::string>());
  p.path = j.at("path").get<std::string>();
  p.count = j.at("count").get<size_t>();
  p.digest = j.at("digest").get<std::string>();
}

std::optional<Label> ProjectState::final_label(const std::string& id) const {
  const auto it = labels.find(id);
  if (it == labels.end()) return std::nullopt;
  return it->second.final_label;
}

int ProjectState::latest_dataset_version() const {
  return datasets.empty() ? 0 : datasets.rbegin()->first;
}

const LabeledDataset* ProjectState::latest_dataset() const {
  return datasets.empty() ? nullptr : &datasets.rbegin()->second;
}

std::set<std::string> ProjectState::dataset_ids() const {
  std::set<std::string> ids;
  for (const auto& [v, d] : datasets) {
    for (const auto& [id, l] : d.train) ids.insert(id);
    for (const auto& [id, l] : d.validation) ids.insert(id);
  }
  return ids;
}

std::set<std::string> ProjectState::holdover_ids() const {
  std::set<std::string> ids;
  if (const auto* d = latest_dataset()) {
    for (const auto& c : d->holdover) ids.insert(c.id);
  }
  return ids;
}

RoundState* ProjectState::current_round() { return rounds.empty() ? nullptr : &rounds.back(); }

const RoundState* ProjectState::current_round() const {
  return rounds.empty() ? nullptr : &rounds.back();
}

bool ProjectState::batch_open(const std::string& batch_id) const {
  const auto it = batches.find(batch_id);
  if (it == batches.end()) return false;
  if (it->second.round == 0) return datasets.empty();
  const auto* r = current_round();
  return r != nullptr && r->round == it->second.round && r->phase == Phase::kLabeling;
}

nlohmann::json state_to_json(const ProjectState& s) {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [id, st] : s.labels) {
    nlohmann::json votes = nlohmann::json::array();
    for (const auto& v : st.votes) {
      votes.push_back({{"oracle_id", v.oracle_id}, {"kind", to_string(v.kind)},
                       {"label", to_string(v.label)}, {"adjudication", v.adjudication},
                       {"event_id", v.event_id}, {"at", v.at}});
    }
    labels[id] = {{"votes", votes},
                  {"final", st.final_label ? nlohmann::json(to_string(*st.final_label))
                                           : nlohmann::json()},
                  {"conflict", st.conflict}};
  }
  nlohmann::json datasets = nlohmann::json::array();
  for (const auto& [v, d] : s.datasets) datasets.push_back(d);
  nlohmann::json synthetic = nlohmann::json::array();
  for (const auto& [id, r] : s.synthetic) synthetic.push_back(r);
  nlohmann::json batches = nlohmann::json::array();
  for (const auto& [id, b] : s.batches) batches.push_back(b);
  return nlohmann::json{{"seq", s.seq},
                        {"labels_required", s.labels_required},
                        {"corpus", s.corpus},
                        {"topics", s.topics},
                        {"batches", batches},
                        {"labels", labels},
                        {"datasets", datasets},
                        {"rounds", s.rounds},
                        {"evaluation", s.evaluation},
                        {"counterfactuals", s.ledger.pairs()},
                        {"synthetic", synthetic},
                        {"checkpoints", s.checkpoints},
                        {"predictions", s.predictions}};
}

namespace {

void add_batch(ProjectState& s, const QueryBatch& b) {
  if (s.batches.contains(b.id)) fail(ErrorCode::kInvalidArgument, "batch " + b.id + " already exists");
  std::set<std::string> seen;
  for (const auto& id : b.record_ids) {
    if (!seen.insert(id).second) {
      fail(ErrorCode::kInvariantViolation, "batch " + b.id + " lists " + id + " twice");
    }
    if (s.batch_of.contains(id) || s.labels.contains(id)) {
      fail(ErrorCode::kInvariantViolation, "batch " + b.id + ": " + id + " was already queued");
    }
  }
}

void commit_batch(ProjectState& s, const QueryBatch& b) {
  for (const auto& id : b.record_ids) s.batch_of[id] = b.id;
  s.batches.emplace(b.id, b);
}

void apply_label(ProjectState& s, const nlohmann::json& ev) {
  const auto& p = ev.at("payload");
  const std::string id = p.at("record_id").get<std::string>();
  const Label label = parse_label(p.at("label").get<std::string>());
  if (label == Label::kUnlabeled) fail(ErrorCode::kInvalidArgument, "label must be positive or negative");
  const auto batch = s.batch_of.find(id);
  if (batch == s.batch_of.end()) fail(ErrorCode::kUnknownRecord, id + " is not in any queue");
  if (!s.batch_open(batch->second)) {
    fail(ErrorCode::kInvalidPhase, "batch " + batch->second + " is not open for labeling");
  }
  LabelVote vote;
  vote.oracle_id = p.at("oracle_id").get<std::string>();
  vote.kind = parse_oracle_kind(p.at("oracle_kind").get<std::string>());
  vote.label = label;
  vote.adjudication = p.value("adjudication", false);
  vote.event_id = "e" + std::to_string(ev.at("seq").get<uint64_t>());
  vote.at = ev.at("at").get<std::string>();
  if (vote.oracle_id.empty()) fail(ErrorCode::kUnauthorized, "label without an oracle id");

  auto& st = s.labels[id];
  if (vote.adjudication) {
    st.votes.push_back(vote);
    st.final_label = label;
    st.conflict = false;
    return;
  }
  if (st.conflict) {
    fail(ErrorCode::kConflictPending, id + " has conflicting labels awaiting adjudication");
  }
  if (const auto* prior = st.vote_of(vote.oracle_id)) {
    if (prior->label == label) {
      fail(ErrorCode::kInvariantViolation, "duplicate vote reached the log for " + id);
    }
  }
  st.votes.push_back(vote);
  std::set<Label> seen;
  for (const auto& v : st.votes) seen.insert(v.label);
  if (seen.size() > 1) {
    st.conflict = true;
    st.final_label.reset();
  } else if (st.votes.size() >= s.labels_required) {
    st.final_label = label;
  }
}

RoundState& round_at(ProjectState& s, int round) {
  if (round < 1 || static_cast<size_t>(round) > s.rounds.size()) {
    fail(ErrorCode::kNotFound, "no round " + std::to_string(round));
  }
  return s.rounds[static_cast<size_t>(round - 1)];
}

void apply_round_started(ProjectState& s, const nlohmann::json& p) {
  const int round = p.at("round").get<int>();
  if (round != static_cast<int>(s.rounds.size()) + 1) {
    fail(ErrorCode::kInvalidArgument, "round " + std::to_string(round) + " is out of sequence");
  }
  if (!s.rounds.empty() && s.rounds.back().phase != Phase::kComplete) {
    fail(ErrorCode::kPreviousIncomplete,
         "round " + std::to_string(s.rounds.back().round) + " is not complete");
  }
  const int version = p.at("dataset_version").get<int>();
  if (!s.datasets.contains(version)) {
    fail(ErrorCode::kNoDataset, "dataset version " + std::to_string(version) + " does not exist");
  }
  RoundState r;
  r.round = round;
  r.phase = Phase::kTraining;
  r.dataset_version = version;
  for (const auto& l : p.at("lineages")) {
    Lineage lineage;
    lineage.mode = parse_mode(l.at("mode").get<std::string>());
    if (!l.at("parent_checkpoint").is_null()) {
      lineage.parent_checkpoint = l.at("parent_checkpoint").get<std::string>();
    }
    if (lineage.mode == TrainMode::kResumeBest && !lineage.parent_checkpoint) {
      fail(ErrorCode::kNoDataset, "resume_best needs a checkpoint from a previous round");
    }
    r.lineages.push_back(std::move(lineage));
  }
  if (r.lineages.empty()) fail(ErrorCode::kInvalidArgument, "a round needs at least one mode");
  s.rounds.push_back(std::move(r));
}

void apply_checkpoints(ProjectState& s, const nlohmann::json& p) {
  auto& r = round_at(s, p.at("round").get<int>());
  if (r.phase != Phase::kTraining) fail(ErrorCode::kInvalidPhase, "round is past training");
  const auto index = p.at("lineage").get<size_t>();
  if (index >= r.lineages.size()) fail(ErrorCode::kInvalidArgument, "no such lineage");
  auto& lineage = r.lineages[index];
  if (lineage.trained) fail(ErrorCode::kInvalidPhase, "lineage already trained");
  std::vector<std::string> ids;
  for (const auto& c : p.at("checkpoints")) ids.push_back(c.at("id").get<std::string>());
  if (ids.empty()) fail(ErrorCode::kInvariantViolation, "training produced no checkpoints");
  for (const auto& c : p.at("checkpoints")) s.checkpoints[c.at("id").get<std::string>()] = c;
  lineage.checkpoint_ids = std::move(ids);
  lineage.trained = true;
}

void apply_phase(ProjectState& s, const nlohmann::json& p) {
  auto& r = round_at(s, p.at("round").get<int>());
  const Phase from = parse_phase(p.at("from").get<std::string>());
  const Phase to = parse_phase(p.at("to").get<std::string>());
  if (r.phase != from || !can_transition(from, to)) {
    fail(ErrorCode::kInvalidPhase, "cannot move round " + std::to_string(r.round) + " from " +
                                       std::string(to_string(r.phase)) + " to " +
                                       std::string(to_string(to)));
  }
  switch (to) {
    case Phase::kCheckpointEval:
      if (!r.trained()) fail(ErrorCode::kInvalidPhase, "training has not finished");
      break;
    case Phase::kPoolPredict: {
      const auto& selected = p.at("selected");
      if (selected.size() != r.lineages.size()) {
        fail(ErrorCode::kInvariantViolation, "selection does not cover every lineage");
      }
      for (size_t i = 0; i < r.lineages.size(); ++i) {
        for (const auto& id : selected[i]) {
          if (!s.checkpoints.contains(id.get<std::string>())) {
            fail(ErrorCode::kNotFound, "unknown checkpoint " + id.get<std::string>());
          }
        }
      }
      for (size_t i = 0; i < r.lineages.size(); ++i) {
        r.lineages[i].selected_ids = selected[i].get<std::vector<std::string>>();
      }
      r.representative = p.at("representative").get<std::string>();
      break;
    }
    case Phase::kQueueBuild:
      for (const auto& ref : p.at("predictions")) s.predictions.push_back(ref.get<PredictionRef>());
      break;
    case Phase::kLabeling: {
      const auto batches = p.at("batches").get<std::vector<QueryBatch>>();
      for (const auto& b : batches) add_batch(s, b);
      for (const auto& b : batches) {
        commit_batch(s, b);
        r.batch_ids.push_back(b.id);
      }
      break;
    }
    case Phase::kExpand: {
      for (const auto& id : r.batch_ids) {
        for (const auto& rid : s.batches.at(id).record_ids) {
          if (!s.final_label(rid)) {
            fail(ErrorCode::kQueueIncomplete, rid + " in batch " + id + " has no final label");
          }
        }
      }
      const auto additions = p.at("evaluation").get<std::vector<nlohmann::json>>();
      std::vector<EvaluationEntry> entries;
      for (const auto& a : additions) {
        EvaluationEntry e;
        e.id = a.at("id").get<std::string>();
        e.label = parse_label(a.at("label").get<std::string>());
        e.pool = parse_pool(a.at("pool").get<std::string>());
        e.round = r.round;
        if (s.final_label(e.id) != e.label) {
          fail(ErrorCode::kInvariantViolation, "evaluation label for " + e.id + " disagrees");
        }
        entries.push_back(e);
      }
      s.evaluation = extend_evaluation_set(s.evaluation, entries, s.dataset_ids());
      break;
    }
    case Phase::kComplete: {
      const auto candidates = p.at("candidates").get<std::vector<Candidate>>();
      const double cap = p.at("ratio_cap").get<double>();
      const auto* current = s.latest_dataset();
      if (current == nullptr) fail(ErrorCode::kNoDataset, "no dataset to expand");
      LabeledDataset next = expand_dataset(*current, candidates, cap);
      auto ids = s.dataset_ids();
      for (const auto& [id, l] : next.train) ids.insert(id);
      for (const auto& [id, l] : next.validation) ids.insert(id);
      for (const auto& c : candidates) ids.insert(c.id);
      assert_disjoint(s.evaluation, ids);
      r.next_dataset_version = next.version;
      if (!p.at("report").is_null()) r.report = p.at("report").get<ReportRow>();
      s.datasets.emplace(next.version, std::move(next));
      break;
    }
    case Phase::kTraining:
      fail(ErrorCode::kInvalidPhase, "no transition into training");
  }
  r.phase = to;
}

void apply_counterfactual(ProjectState& s, const nlohmann::json& p) {
  const auto pair = p.at("pair").get<CounterfactualPair>();
  const auto record = p.at("record").get<TriageRecord>();
  if (record.id != pair.synthetic_id || record.pool != Pool::kSynthetic) {
    fail(ErrorCode::kInvariantViolation, "counterfactual record does not match its pair");
  }
  if (s.synthetic.contains(record.id)) {
    fail(ErrorCode::kInvalidArgument, "synthetic id " + record.id + " already used");
  }
  s.ledger.add(pair);
  s.synthetic.emplace(record.id, record);
}

}  // namespace

void apply_event(ProjectState& s, const nlohmann::json& ev) {
  const uint64_t seq = ev.at("seq").get<uint64_t>();
  if (seq != s.seq + 1) {
    fail(ErrorCode::kInvariantViolation, "event " + std::to_string(seq) + " out of sequence after " +
                                             std::to_string(s.seq));
  }
  const std::string type = ev.at("type").get<std::string>();
  const auto& p = ev.at("payload");
  if (type == "project_created") {
    s.labels_required = p.at("labels_required").get<size_t>();
  } else if (type == "corpus_loaded") {
    s.corpus = p;
  } else if (type == "topics_built") {
    s.topics = p;
  } else if (type == "batch_created") {
    const auto b = p.at("batch").get<QueryBatch>();
    if (b.round != 0 || !s.datasets.empty()) {
      fail(ErrorCode::kInvalidPhase, "seed batches are only accepted before the seed dataset");
    }
    add_batch(s, b);
    commit_batch(s, b);
  } else if (type == "label") {
    apply_label(s, ev);
  } else if (type == "dataset_created") {
    if (!s.datasets.empty()) fail(ErrorCode::kInvalidPhase, "the seed dataset already exists");
    const auto candidates = p.at("candidates").get<std::vector<Candidate>>();
    LabeledDataset d = make_seed_dataset(candidates);
    s.datasets.emplace(d.version, std::move(d));
  } else if (type == "round_started") {
    apply_round_started(s, p);
  } else if (type == "checkpoints_recorded") {
    apply_checkpoints(s, p);
  } else if (type == "phase_advanced") {
    apply_phase(s, p);
  } else if (type == "counterfactual") {
    apply_counterfactual(s, p);
  } else {
    fail(ErrorCode::kInvariantViolation, "unknown event type '" + type + "'");
  }
  s.seq = seq;
}

ProjectState replay(std::span<const nlohmann::json> events) {
  ProjectState s;
  for (const auto& ev : events) apply_event(s, ev);
  return s;
}

void to_json(nlohmann::json& j, const LabelAck& a) {
  j = nlohmann::json{{"event_id", a.event_id}, {"status", a.status},
                     {"final_label", a.final_label ? nlohmann::json(to_string(*a.final_label))
                                                   : nlohmann::json()}};
}

void to_json(nlohmann::json& j, const QueueItem& q) {
  nlohmann::json matches = nlohmann::json::array();
  for (const auto& [offset, length] : q.include_matches) matches.push_back({offset, length});
  j = nlohmann::json{{"record", q.record},
                     {"batch_id", q.batch_id},
                     {"strategy", to_string(q.strategy)},
                     {"probability", q.score},
                     {"pattern_match", q.pattern_match},
                     {"include_matches", matches},
                     {"topic", opt_json(q.topic)},
                     {"topic_keywords", q.topic_keywords}};
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / ".lock";
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) fail(ErrorCode::kIo, "cannot open " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    fail(ErrorCode::kIo, "project " + dir.string() + " is locked by another process");
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

// ---------------------------------------------------------------- Project

namespace {

std::unique_ptr<ClassifierBackend> make_backend(const ProjectConfig& c,
                                                std::shared_ptr<const Embedder> embedder) {
  if (c.backend.kind == "external") return std::make_unique<ExternalBackend>(*c.backend.endpoint);
  return std::make_unique<NativeBackend>(std::move(embedder));
}

std::filesystem::path records_path(const std::filesystem::path& dir, Pool pool) {
  return dir / "records" / (std::string(to_string(pool)) + ".jsonl");
}

}  // namespace

Project::Project(ProjectConfig config, std::filesystem::path dir)
    : config_(std::move(config)), dir_(std::move(dir)) {
  embedder_ = std::make_shared<CachingEmbedder>(std::shared_ptr<const Embedder>(make_embedder(config_.embedder)));
  backend_ = make_backend(config_, embedder_);
}

std::unique_ptr<Project> Project::create(const ProjectConfig& config) {
  config.validate();
  const auto dir = config.project_dir;
  if (std::filesystem::exists(dir / "events.jsonl")) {
    fail(ErrorCode::kIo, "project " + dir.string() + " already exists");
  }
  for (const char* sub : {"records", "checkpoints", "predictions", "reports"}) {
    std::filesystem::create_directories(dir / sub);
  }
  write_json(dir / "config.json", config);
  std::unique_ptr<Project> p(new Project(config, dir));
  p->log_.open(dir / "events.jsonl", std::ios::app);
  if (!p->log_) fail(ErrorCode::kIo, "cannot open event log in " + dir.string());
  std::lock_guard lock(p->mu_);
  nlohmann::json digestable = config;
  digestable.erase("project_dir");
  p->commit("project_created", {{"name", config.name},
                                {"labels_required", config.loop.labels_required},
                                {"config_digest", hex_digest(digestable.dump())}});
  return p;
}

std::unique_ptr<Project> Project::open(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "events.jsonl")) {
    fail(ErrorCode::kIo, "no project at " + dir.string());
  }
  auto config = read_json(dir / "config.json").get<ProjectConfig>();
  config.project_dir = dir;
  std::unique_ptr<Project> p(new Project(config, dir));
  const auto events = read_jsonl(dir / "events.jsonl");
  p->state_ = replay(events);
  p->load_pools();
  if (std::filesystem::exists(dir / "topics.json")) {
    p->topics_ = read_json(dir / "topics.json").get<TopicModel>();
  }
  p->log_.open(dir / "events.jsonl", std::ios::app);
  if (!p->log_) fail(ErrorCode::kIo, "cannot open event log in " + dir.string());
  return p;
}

void Project::load_pools() {
  records_.clear();
  for (Pool pool : {Pool::kFocused, Pool::kDeployment}) {
    const auto path = records_path(dir_, pool);
    if (!std::filesystem::exists(path)) continue;
    for (auto& r : read_records(path)) records_.emplace(r.id, std::move(r));
  }
}

std::string Project::clock(uint64_t seq) const {
  std::tm origin{};
  if (strptime(config_.clock_origin.c_str(), "%Y-%m-%dT%H:%M:%SZ", &origin) == nullptr) {
    fail(ErrorCode::kConfig, "clock_origin must look like 2024-01-01T00:00:00Z");
  }
  const std::time_t t = timegm(&origin) + static_cast<std::time_t>(seq);
  std::tm out{};
  gmtime_r(&t, &out);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &out);
  return buf;
}

nlohmann::json Project::commit(const std::string& type, nlohmann::json payload) {
  const uint64_t seq = state_.seq + 1;
  nlohmann::json ev{{"seq", seq}, {"type", type}, {"at", clock(seq)}, {"payload", std::move(payload)}};
  apply_event(state_, ev);
  log_ << ev.dump() << '\n';
  log_.flush();
  if (!log_) fail(ErrorCode::kIo, "failed to append to the event log");
  return ev;
}

void Project::write_snapshot() {
  write_json(dir_ / "snapshot.json", state_to_json(state_));
}

const TriageRecord& Project::record(const std::string& id) const {
  if (const auto it = records_.find(id); it != records_.end()) return it->second;
  if (const auto it = state_.synthetic.find(id); it != state_.synthetic.end()) return it->second;
  fail(ErrorCode::kUnknownRecord, "unknown record " + id);
}

std::vector<TriageRecord> Project::records_for(std::span<const std::string> ids) const {
  std::vector<TriageRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(record(id));
  return out;
}

void Project::load_corpus(std::span<const TriageRecord> focused,
                          std::span<const TriageRecord> deployment) {
  std::lock_guard lock(mu_);
  if (!state_.corpus.is_null()) fail(ErrorCode::kInvalidPhase, "corpus already loaded");
  std::vector<TriageRecord> clean_focused;
  std::vector<TriageRecord> clean_deployment;
  std::vector<TriageRecord> empty;
  std::set<std::string> ids;
  auto prep = [&](const TriageRecord& raw, Pool pool, std::vector<TriageRecord>& out) {
    if (!ids.insert(raw.id).second) fail(ErrorCode::kInvalidArgument, "duplicate record id " + raw.id);
    try {
      TriageRecord r = preprocess(raw, config_.corpus.strip_patterns);
      r.pool = pool;
      r.label = Label::kUnlabeled;
      r.label_source = LabelSource::kNone;
      out.push_back(std::move(r));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyAfterStrip) throw;
      empty.push_back(raw);
    }
  };
  for (const auto& r : focused) prep(r, Pool::kFocused, clean_focused);
  for (const auto& r : deployment) prep(r, Pool::kDeployment, clean_deployment);
  const FilterResult filtered = keyword_filter(clean_focused, config_.rules);
  write_records(records_path(dir_, Pool::kFocused), filtered.retained);
  write_rejections(dir_ / "records" / "focused_rejected.jsonl", filtered);
  write_records(records_path(dir_, Pool::kDeployment), clean_deployment);
  if (!empty.empty()) write_records(dir_ / "records" / "empty_after_strip.jsonl", empty);

  std::string id_list;
  for (const auto& id : ids) id_list += id + "\n";
  load_pools();
  commit("corpus_loaded", {{"focused", filtered.retained.size()},
                           {"focused_rejected", filtered.rejected.size()},
                           {"deployment", clean_deployment.size()},
                           {"empty_after_strip", empty.size()},
                           {"rules_version", config_.rules.version},
                           {"digest", hex_digest(id_list)}});
}

std::vector<TriageRecord> Project::pool_records(Pool pool) const {
  std::lock_guard lock(mu_);
  std::vector<TriageRecord> out;
  if (pool == Pool::kSynthetic) {
    for (const auto& [id, r] : state_.synthetic) out.push_back(r);
    return out;
  }
  for (const auto& [id, r] : records_) {
    if (r.pool == pool) out.push_back(r);
  }
  return out;
}

void Project::build_topics(const std::function<bool(const TriageRecord&)>& probe) {
  std::lock_guard lock(mu_);
  if (state_.corpus.is_null()) fail(ErrorCode::kInvalidPhase, "load the corpus first");
  if (!state_.topics.is_null()) fail(ErrorCode::kInvalidPhase, "topics already built");
  std::vector<std::string> ids;
  std::vector<std::string> texts;
  std::map<std::string, std::string> by_id;
  for (const auto& [id, r] : records_) {
    if (r.pool != Pool::kFocused) continue;
    ids.push_back(id);
    texts.push_back(r.clean_text);
    by_id.emplace(id, r.clean_text);
  }
  const auto vectors = embedder_->embed_batch(texts);
  const auto& tc = config_.topics;
  TopicModel model = cluster(ids, vectors, std::min(tc.k, ids.size()), tc.seed);
  if (tc.reduce_to && *tc.reduce_to < model.k) model = reduce_topics(model, ids, vectors, *tc.reduce_to);
  model = summarize(std::move(model), by_id, tc.top_n, english_stopwords());
  std::map<std::string, bool> probes;
  for (size_t t = 0; t < model.k; ++t) {
    const auto members = model.members_by_distance(t);
    const auto picked = interval_sample(members, std::min(tc.probe_per_topic, members.size()));
    for (const auto& id : picked) probes[id] = probe(records_.at(id));
  }
  model = flag_target_topics(std::move(model), probes, tc.flag_threshold);
  write_json(dir_ / "topics.json", model);
  const auto counts = model.member_counts();
  nlohmann::json summary = nlohmann::json::array();
  for (size_t t = 0; t < model.k; ++t) {
    nlohmann::json kw = nlohmann::json::array();
    for (const auto& k : model.keywords[t]) kw.push_back(k.ngram);
    summary.push_back({{"topic", t}, {"members", counts[t]}, {"flagged", bool(model.target_flag[t])},
                       {"keywords", kw}});
  }
  commit("topics_built", {{"k", model.k},
                          {"flagged", model.flagged_count()},
                          {"degenerate", model.degenerate},
                          {"probes", probes.size()},
                          {"topics", summary},
                          {"digest", hex_digest(nlohmann::json(model).dump())}});
  topics_ = std::move(model);
}

std::optional<TopicModel> Project::topic_model() const {
  std::lock_guard lock(mu_);
  return topics_;
}

QueryBatch Project::create_seed_batch() {
  std::lock_guard lock(mu_);
  if (!topics_) fail(ErrorCode::kInvalidPhase, "build topics first");
  QueryBatch b = seed_sample(*topics_, config_.quota);
  b.id = "seed";
  b.round = 0;
  b.pool = Pool::kFocused;
  b.created_at = clock(state_.seq + 1);
  commit("batch_created", {{"batch", b}});
  return b;
}

const LabeledDataset& Project::create_seed_dataset() {
  std::lock_guard lock(mu_);
  const auto it = state_.batches.find("seed");
  if (it == state_.batches.end()) fail(ErrorCode::kNoDataset, "no seed batch");
  std::vector<Candidate> candidates;
  for (const auto& id : it->second.record_ids) {
    const auto label = state_.final_label(id);
    if (!label) fail(ErrorCode::kQueueIncomplete, "seed record " + id + " has no final label");
    Candidate c;
    c.id = id;
    c.label = *label;
    c.split = hash_fraction_below(id, config_.loop.seed ^ kSeedSplitSalt, config_.loop.validation_share)
                  ? Split::kValidation
                  : Split::kTrain;
    c.priority = 1.0;
    candidates.push_back(c);
  }
  commit("dataset_created", {{"candidates", candidates}});
  write_snapshot();
  return state_.datasets.at(1);
}

LabelAck Project::submit_label(const std::string& record_id, Label label,
                               const OracleIdentity& oracle, bool adjudicate) {
  std::lock_guard lock(mu_);
  if (adjudicate && !oracle.adjudicator) {
    fail(ErrorCode::kUnauthorized, oracle.id + " may not adjudicate");
  }
  if (const auto it = state_.labels.find(record_id); it != state_.labels.end() && !adjudicate) {
    if (const auto* prior = it->second.vote_of(oracle.id); prior && prior->label == label) {
      return LabelAck{prior->event_id, "duplicate", it->second.final_label};
    }
  }
  if (adjudicate) {
    const auto it = state_.labels.find(record_id);
    if (it == state_.labels.end() || !it->second.conflict) {
      fail(ErrorCode::kInvalidArgument, record_id + " has no conflict to adjudicate");
    }
  }
  const auto ev = commit("label", {{"record_id", record_id},
                                   {"label", to_string(label)},
                                   {"oracle_id", oracle.id},
                                   {"oracle_kind", to_string(oracle.kind)},
                                   {"adjudication", adjudicate}});
  const auto& st = state_.labels.at(record_id);
  LabelAck ack{"e" + std::to_string(ev.at("seq").get<uint64_t>()), "pending", st.final_label};
  if (st.conflict) {
    fail(ErrorCode::kConflictPending,
         record_id + " now has conflicting labels; recorded as " + ack.event_id);
  }
  if (st.final_label) ack.status = "final";
  return ack;
}

int Project::start_round(const std::vector<TrainMode>& modes) {
  std::lock_guard lock(mu_);
  const int round = static_cast<int>(state_.rounds.size()) + 1;
  if (state_.datasets.empty()) fail(ErrorCode::kNoDataset, "no dataset version exists yet");
  const auto* previous = state_.current_round();
  if (previous != nullptr && previous->phase != Phase::kComplete) {
    fail(ErrorCode::kPreviousIncomplete, "round " + std::to_string(previous->round) + " is not complete");
  }
  if (modes.empty()) fail(ErrorCode::kInvalidArgument, "at least one training mode is required");
  nlohmann::json lineages = nlohmann::json::array();
  for (TrainMode m : modes) {
    nlohmann::json parent;
    if (m == TrainMode::kResumeBest) {
      if (previous == nullptr || !previous->representative) {
        fail(ErrorCode::kNoDataset, "resume_best needs a completed previous round");
      }
      parent = *previous->representative;
    }
    lineages.push_back({{"mode", to_string(m)}, {"parent_checkpoint", parent}});
  }
  TrainConfig tc = config_.train;
  tc.seed = config_.train.seed + static_cast<uint64_t>(round) * 1000;
  commit("round_started", {{"round", round},
                           {"dataset_version", state_.latest_dataset_version()},
                           {"lineages", lineages},
                           {"train", tc}});
  write_snapshot();
  return round;
}

void Project::run_training(int round) {
  struct Pending {
    size_t index;
    TrainingJob job;
  };
  std::vector<Pending> pending;
  {
    std::lock_guard lock(mu_);
    auto& r = round_at(state_, round);
    if (r.phase != Phase::kTraining) fail(ErrorCode::kInvalidPhase, "round is past training");
    const auto& data = state_.datasets.at(r.dataset_version);
    const auto events = read_jsonl(dir_ / "events.jsonl");
    TrainConfig tc = config_.train;
    for (const auto& ev : events) {
      if (ev.at("type") == "round_started" && ev.at("payload").at("round") == round) {
        tc = ev.at("payload").at("train").get<TrainConfig>();
      }
    }
    for (size_t i = 0; i < r.lineages.size(); ++i) {
      const auto& l = r.lineages[i];
      if (l.trained) continue;
      TrainingJob job;
      for (const auto& [id, label] : data.train) {
        job.train_ids.push_back(id);
        job.train_texts.push_back(record(id).clean_text);
        job.train_labels.push_back(label == Label::kPositive ? 1 : 0);
      }
      for (const auto& [id, label] : data.validation) {
        job.validation_ids.push_back(id);
        job.validation_texts.push_back(record(id).clean_text);
        job.validation_labels.push_back(label == Label::kPositive ? 1 : 0);
      }
      job.config = tc;
      job.config.seed = tc.seed + i;
      job.context.round = round;
      job.context.dataset_version = r.dataset_version;
      job.context.lineage = std::string(to_string(l.mode));
      job.context.id_prefix = "r" + std::to_string(round) +
                              (l.mode == TrainMode::kFromScratch ? "-fs" : "-rb");
      if (l.parent_checkpoint) job.init = load_checkpoint(*l.parent_checkpoint);
      pending.push_back({i, std::move(job)});
    }
  }
  for (auto& [index, job] : pending) {
    auto checkpoints = backend_->train(job);
    nlohmann::json summaries = nlohmann::json::array();
    for (const auto& c : checkpoints) {
      write_json(dir_ / "checkpoints" / (c.id + ".json"), c);
      summaries.push_back(checkpoint_summary(c));
    }
    std::lock_guard lock(mu_);
    commit("checkpoints_recorded", {{"round", round}, {"lineage", index}, {"checkpoints", summaries}});
  }
  std::lock_guard lock(mu_);
  write_snapshot();
}

Checkpoint Project::load_checkpoint(const std::string& id) const {
  const auto path = dir_ / "checkpoints" / (id + ".json");
  if (!std::filesystem::exists(path)) fail(ErrorCode::kNotFound, "no checkpoint " + id);
  return read_json(path).get<Checkpoint>();
}

Predictions Project::predict(const Checkpoint& checkpoint,
                             std::span<const TriageRecord> records) const {
  return backend_->predict(checkpoint, records);
}

ConfusionMatrix Project::score_on_evaluation(const Checkpoint& checkpoint) const {
  const auto ids = state_.evaluation.ids();
  const auto records = records_for(ids);
  return confusion(state_.evaluation.labels(), backend_->predict(checkpoint, records));
}

nlohmann::json Project::select_for_eval(const RoundState& r) const {
  nlohmann::json selected = nlohmann::json::array();
  std::vector<Checkpoint> candidates;
  for (const auto& l : r.lineages) {
    std::vector<Checkpoint> all;
    for (const auto& id : l.checkpoint_ids) all.push_back(state_.checkpoints.at(id).get<Checkpoint>());
    const auto top = select_checkpoints(all, config_.loop.top_k);
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& c : top) {
      ids.push_back(c.id);
      candidates.push_back(c);
    }
    selected.push_back(ids);
  }
  std::stable_sort(candidates.begin(), candidates.end(), checkpoint_precedes);
  std::string representative = candidates.front().id;
  nlohmann::json scores = nlohmann::json::object();
  const bool scorable = state_.evaluation.positive_count > 0 && state_.evaluation.negative_count > 0;
  if (scorable) {
    double best = -1.0;
    for (const auto& c : candidates) {
      const auto cm = score_on_evaluation(load_checkpoint(c.id));
      const double f1 = metrics(cm, 1.0).f1;
      scores[c.id] = f1;
      if (f1 > best) {
        best = f1;
        representative = c.id;
      }
    }
  }
  return {{"selected", selected},
          {"representative", representative},
          {"ranked_on", scorable ? "evaluation" : "validation"},
          {"evaluation_f1", scores}};
}

nlohmann::json Project::run_pool_predictions(const RoundState& r) {
  const auto used = state_.dataset_ids();
  std::set<std::string> exposed;
  const auto exposure = config_.loop.deployment_exposure(r.round);
  if (exposure) {
    std::vector<std::pair<uint64_t, std::string>> order;
    for (const auto& [id, rec] : records_) {
      if (rec.pool == Pool::kDeployment) order.emplace_back(stable_hash(id, config_.loop.seed ^ kExposureSalt), id);
    }
    std::sort(order.begin(), order.end());
    for (size_t i = 0; i < order.size() && i < *exposure; ++i) exposed.insert(order[i].second);
  }
  std::map<Pool, std::vector<TriageRecord>> pools;
  for (const auto& [id, rec] : records_) {
    if (state_.labels.contains(id) || state_.batch_of.contains(id) || used.contains(id) ||
        state_.evaluation.contains(id)) {
      continue;
    }
    if (exposure && rec.pool == Pool::kDeployment && !exposed.contains(id)) continue;
    pools[rec.pool].push_back(rec);
  }
  const auto folder = dir_ / "predictions" / ("r" + std::to_string(r.round));
  std::filesystem::create_directories(folder);
  nlohmann::json refs = nlohmann::json::array();
  for (const auto& id : r.selected_checkpoints()) {
    const auto checkpoint = load_checkpoint(id);
    for (Pool pool : {Pool::kFocused, Pool::kDeployment}) {
      const auto preds = backend_->predict(checkpoint, pools[pool]);
      const nlohmann::json doc = preds;
      const auto rel = std::filesystem::path("predictions") / ("r" + std::to_string(r.round)) /
                       (id + "." + std::string(to_string(pool)) + ".json");
      write_json(dir_ / rel, doc);
      refs.push_back(PredictionRef{r.round, id, pool, rel.string(), preds.size(), hex_digest(doc.dump())});
    }
  }
  return {{"predictions", refs}};
}

nlohmann::json Project::build_queues(const RoundState& r) const {
  nlohmann::json batches = nlohmann::json::array();
  const auto at = clock(state_.seq + 1);
  for (Pool pool : {Pool::kFocused, Pool::kDeployment}) {
    Predictions combined;
    for (const auto& ref : state_.predictions) {
      if (ref.round != r.round || ref.pool != pool) continue;
      const auto preds = read_json(dir_ / ref.path).get<Predictions>();
      for (const auto& [id, p] : preds) {
        auto [it, inserted] = combined.emplace(id, p);
        if (!inserted) it->second = std::max(it->second, p);
      }
    }
    std::map<std::string, std::string> texts;
    for (const auto& [id, p] : combined) texts.emplace(id, record(id).clean_text);
    const double threshold = config_.loop.uncertainty_threshold;
    for (QueryBatch b : {mine_false_negatives(combined, texts, config_.rules, threshold),
                         positive_predictions(combined), uncertain_negatives(combined, threshold)}) {
      b.id = "r" + std::to_string(r.round) + "-" + std::string(to_string(pool)) + "-" +
             std::string(to_string(b.strategy));
      b.pool = pool;
      b.round = r.round;
      b.created_at = at;
      batches.push_back(b);
    }
  }
  return {{"batches", batches}};
}

nlohmann::json Project::route_evaluation(const RoundState& r) const {
  nlohmann::json additions = nlohmann::json::array();
  if (r.round < config_.loop.eval_from_round) return {{"evaluation", additions}};
  for (const auto& bid : r.batch_ids) {
    const auto& b = state_.batches.at(bid);
    if (b.pool != Pool::kDeployment) continue;
    for (const auto& id : b.record_ids) {
      if (!hash_fraction_below(id, config_.loop.seed ^ kEvaluationSalt, config_.loop.eval_share)) {
        continue;
      }
      const auto label = state_.final_label(id);
      if (!label) fail(ErrorCode::kQueueIncomplete, id + " has no final label");
      additions.push_back({{"id", id}, {"label", to_string(*label)}, {"pool", to_string(*b.pool)}});
    }
  }
  return {{"evaluation", additions}};
}

nlohmann::json Project::expansion(const RoundState& r) const {
  std::vector<Candidate> candidates;
  const double share = config_.loop.validation_addition(r.round);
  for (const auto& bid : r.batch_ids) {
    const auto& b = state_.batches.at(bid);
    for (size_t i = 0; i < b.record_ids.size(); ++i) {
      const auto& id = b.record_ids[i];
      if (state_.evaluation.contains(id)) continue;
      Candidate c;
      c.id = id;
      c.label = *state_.final_label(id);
      c.split = share > 0.0 && hash_fraction_below(id, config_.loop.seed ^ (kValidationSalt + r.round), share)
                    ? Split::kValidation
                    : Split::kTrain;
      c.priority = i < b.scores.size() ? b.scores[i] : 0.0;
      candidates.push_back(c);
    }
  }
  const auto used = state_.dataset_ids();
  for (const auto& pair : state_.ledger.pairs()) {
    if (used.contains(pair.synthetic_id)) continue;
    const auto& rec = state_.synthetic.at(pair.synthetic_id);
    Candidate c;
    c.id = pair.synthetic_id;
    c.label = rec.label;
    c.split = parse_split(pair.split);
    c.priority = 1.0;
    c.synthetic = true;
    candidates.push_back(c);
  }
  nlohmann::json report;
  if (r.representative && state_.evaluation.size() > 0) {
    report = round_row(r, *r.representative, "Round " + std::to_string(r.round), kReportBeta);
  }
  return {{"candidates", candidates}, {"ratio_cap", config_.loop.ratio_cap}, {"report", report}};
}

RoundState Project::advance(int round) {
  std::lock_guard lock(mu_);
  const RoundState r = round_at(state_, round);
  if (state_.current_round()->round != round) {
    fail(ErrorCode::kInvalidPhase, "round " + std::to_string(round) + " is not the current round");
  }
  const Phase to = next_phase(r.phase);
  nlohmann::json payload;
  switch (to) {
    case Phase::kCheckpointEval:
      if (!r.trained()) fail(ErrorCode::kInvalidPhase, "training has not finished");
      payload = nlohmann::json::object();
      break;
    case Phase::kPoolPredict: payload = select_for_eval(r); break;
    case Phase::kQueueBuild: payload = run_pool_predictions(r); break;
    case Phase::kLabeling: payload = build_queues(r); break;
    case Phase::kExpand: payload = route_evaluation(r); break;
    case Phase::kComplete: payload = expansion(r); break;
    case Phase::kTraining: fail(ErrorCode::kInvalidPhase, "no transition into training");
  }
  payload["round"] = round;
  payload["from"] = to_string(r.phase);
  payload["to"] = to_string(to);
  commit("phase_advanced", payload);
  const RoundState& now = round_at(state_, round);
  if (now.phase == Phase::kComplete) {
    write_json(dir_ / "reports" / ("round-" + std::to_string(round) + ".json"),
               nlohmann::json{{"round", now},
                              {"dataset", state_.datasets.at(*now.next_dataset_version)}});
  }
  write_snapshot();
  return now;
}

FlipResult Project::author_counterfactual(const std::string& source_id, FlipDirection direction,
                                          const std::string& span, std::optional<size_t> position,
                                          const OracleIdentity& oracle) {
  std::lock_guard lock(mu_);
  if (oracle.id.empty()) fail(ErrorCode::kUnauthorized, "counterfactuals need an oracle id");
  TriageRecord source = record(source_id);
  if (source.pool == Pool::kSynthetic) {
    fail(ErrorCode::kInvalidArgument, "counterfactuals of synthetic records are not allowed");
  }
  const auto label = state_.final_label(source_id);
  if (!label) fail(ErrorCode::kInvalidArgument, source_id + " has no final label");
  if (state_.evaluation.contains(source_id)) {
    fail(ErrorCode::kLeakageDetected, source_id + " belongs to the evaluation set");
  }
  if (direction == FlipDirection::kToPositive && !position) {
    fail(ErrorCode::kPositionOutOfBounds, "flip_to_positive needs a token position");
  }
  source.label = *label;
  char id[32];
  std::snprintf(id, sizeof id, "S%06zu", state_.ledger.size() + 1);
  const int round = state_.rounds.empty() ? 0 : state_.current_round()->round;
  FlipResult result = direction == FlipDirection::kToNegative
                          ? flip_to_negative(source, span, config_.rules, round, id)
                          : flip_to_positive(source, span, *position, config_.rules,
                                             round, id);
  bool in_validation = false;
  for (const auto& [v, d] : state_.datasets) in_validation = in_validation || d.validation.contains(source_id);
  result.pair.split = in_validation ? "validation" : "train";
  if (invert_edit(result.pair, result.synthetic.clean_text) != source.clean_text) {
    fail(ErrorCode::kInvariantViolation, "counterfactual edit does not round-trip");
  }
  commit("counterfactual", {{"pair", result.pair}, {"record", result.synthetic},
                            {"oracle_id", oracle.id}});
  return result;
}

namespace {

int strategy_rank(Strategy s) {
  switch (s) {
    case Strategy::kFnMining: return 0;
    case Strategy::kPositivePrediction: return 1;
    case Strategy::kUncertainNegative: return 2;
    case Strategy::kDiversitySeed: return 3;
  }
  return 4;
}

}  // namespace

std::optional<QueueItem> Project::queue_next(std::optional<Strategy> strategy,
                                             const std::string& oracle_id) const {
  std::lock_guard lock(mu_);
  std::vector<const QueryBatch*> open;
  for (const auto& [id, b] : state_.batches) {
    if (!state_.batch_open(id)) continue;
    if (strategy && b.strategy != *strategy) continue;
    open.push_back(&b);
  }
  std::stable_sort(open.begin(), open.end(), [](const QueryBatch* a, const QueryBatch* b) {
    const int ra = strategy_rank(a->strategy);
    const int rb = strategy_rank(b->strategy);
    if (ra != rb) return ra < rb;
    return a->pool < b->pool;
  });
  for (const auto* b : open) {
    for (size_t i = 0; i < b->record_ids.size(); ++i) {
      const auto& id = b->record_ids[i];
      if (const auto it = state_.labels.find(id); it != state_.labels.end()) {
        const auto& st = it->second;
        if (st.final_label || st.conflict || st.vote_of(oracle_id) != nullptr) continue;
      }
      QueueItem item;
      item.record = record(id);
      if (const auto l = state_.final_label(id)) item.record.label = *l;
      item.batch_id = b->id;
      item.strategy = b->strategy;
      item.score = i < b->scores.size() ? b->scores[i] : 0.0;
      item.pattern_match = pattern_match(item.record, config_.rules);
      item.include_matches = include_matches(item.record.clean_text, config_.rules);
      if (topics_) {
        item.topic = topics_->topic_of(id);
        if (item.topic) {
          for (const auto& k : topics_->keywords[*item.topic]) item.topic_keywords.push_back(k.ngram);
        }
      }
      return item;
    }
  }
  return std::nullopt;
}

std::vector<std::string> Project::pending_records() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, b] : state_.batches) {
    if (!state_.batch_open(id)) continue;
    for (const auto& rid : b.record_ids) {
      if (!state_.final_label(rid)) out.push_back(rid);
    }
  }
  return out;
}

std::vector<std::string> Project::conflicts() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, st] : state_.labels) {
    if (st.conflict) out.push_back(id);
  }
  return out;
}

std::optional<TriageRecord> Project::find_record(const std::string& id) const {
  std::lock_guard lock(mu_);
  if (!records_.contains(id) && !state_.synthetic.contains(id)) return std::nullopt;
  TriageRecord r = record(id);
  if (const auto l = state_.final_label(id)) {
    r.label = *l;
    r.label_source = state_.labels.at(id).votes.back().kind == OracleKind::kHuman
                         ? LabelSource::kHuman
                         : LabelSource::kSimulated;
  }
  return r;
}

nlohmann::json Project::record_view(const std::string& id) const {
  const auto r = find_record(id);
  if (!r) fail(ErrorCode::kNotFound, "no record " + id);
  std::lock_guard lock(mu_);
  nlohmann::json view{{"record", *r}};
  if (const auto it = state_.labels.find(id); it != state_.labels.end()) {
    nlohmann::json votes = nlohmann::json::array();
    for (const auto& v : it->second.votes) {
      votes.push_back({{"oracle_id", v.oracle_id}, {"label", to_string(v.label)},
                       {"adjudication", v.adjudication}, {"event_id", v.event_id}, {"at", v.at}});
    }
    view["votes"] = votes;
    view["conflict"] = it->second.conflict;
  }
  if (const auto it = state_.batch_of.find(id); it != state_.batch_of.end()) view["batch_id"] = it->second;
  std::string membership = "pool";
  if (state_.evaluation.contains(id)) membership = "evaluation";
  if (const auto* d = state_.latest_dataset()) {
    if (d->train.contains(id)) membership = "train";
    if (d->validation.contains(id)) membership = "validation";
    for (const auto& c : d->holdover) {
      if (c.id == id) membership = "holdover";
    }
  }
  view["membership"] = membership;
  if (const auto* pair = state_.ledger.find(id)) view["counterfactual"] = *pair;
  return view;
}

ReportRow Project::round_row(const RoundState& r, const std::string& checkpoint_id, std::string name,
                             double beta) const {
  const auto checkpoint = load_checkpoint(checkpoint_id);
  const auto ids = state_.evaluation.ids();
  const auto records = records_for(ids);
  const auto preds = backend_->predict(checkpoint, records);
  ReportRow row = make_row(std::move(name), confusion(state_.evaluation.labels(), preds), beta,
                           checkpoint_id);
  if (state_.evaluation.positive_count > 0 && state_.evaluation.negative_count > 0) {
    row.metrics.auc = compute_auc(state_.evaluation.labels(), preds);
  }
  (void)r;
  return row;
}

ReportRow Project::round_metrics(int round, double beta) const {
  std::lock_guard lock(mu_);
  const auto& r = round_at(const_cast<ProjectState&>(state_), round);
  if (!r.representative) fail(ErrorCode::kInvalidPhase, "round " + std::to_string(round) + " has no selected checkpoint yet");
  return round_row(r, *r.representative, "Round " + std::to_string(round), beta);
}

ReportRow Project::baseline_metrics(double beta) const {
  std::lock_guard lock(mu_);
  Predictions preds;
  for (const auto& id : state_.evaluation.ids()) {
    preds[id] = pattern_match(record(id), config_.rules) ? 1.0 : 0.0;
  }
  return make_row("Pattern Matching", confusion(state_.evaluation.labels(), preds), beta);
}

std::vector<ReportRow> Project::report_rows(double beta) const {
  std::vector<ReportRow> rows;
  std::vector<RoundState> rounds;
  {
    std::lock_guard lock(mu_);
    rounds = state_.rounds;
  }
  for (const auto& r : rounds) {
    if (!r.representative) continue;
    {
      std::lock_guard lock(mu_);
      rows.push_back(round_row(r, *r.representative, "Round " + std::to_string(r.round), beta));
      for (const auto& l : r.lineages) {
        if (l.selected_ids.empty()) continue;
        const bool holds_rep = std::find(l.selected_ids.begin(), l.selected_ids.end(),
                                         *r.representative) != l.selected_ids.end();
        if (holds_rep) continue;
        rows.push_back(round_row(r, l.selected_ids.front(),
                                 "Round " + std::to_string(r.round) + " " + std::string(to_string(l.mode)),
                                 beta));
      }
    }
  }
  rows.push_back(baseline_metrics(beta));
  return rows;
}

nlohmann::json Project::dataset_table() const {
  std::lock_guard lock(mu_);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [v, d] : state_.datasets) {
    const auto t = d.train_counts();
    const auto val = d.validation_counts();
    rows.push_back({{"version", v},
                    {"train", {{"positive", t.positive}, {"negative", t.negative}, {"total", t.total()},
                               {"synthetic_percent", synthetic_percent(t.synthetic_fraction())}}},
                    {"validation", {{"positive", val.positive}, {"negative", val.negative},
                                    {"total", val.total()},
                                    {"synthetic_percent", synthetic_percent(val.synthetic_fraction())}}},
                    {"holdover", d.holdover.size()}});
  }
  return rows;
}

nlohmann::json Project::final_report(double beta) const {
  const auto rows = report_rows(beta);
  const auto datasets = dataset_table();
  std::lock_guard lock(mu_);
  return {{"beta", beta},
          {"evaluation", {{"size", state_.evaluation.size()},
                          {"positive", state_.evaluation.positive_count},
                          {"negative", state_.evaluation.negative_count}}},
          {"rows", rows},
          {"datasets", datasets},
          {"rounds", state_.rounds}};
}

ProjectState Project::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

nlohmann::json Project::state_json() const {
  std::lock_guard lock(mu_);
  return state_to_json(state_);
}

std::vector<nlohmann::json> Project::events() const {
  std::lock_guard lock(mu_);
  return read_jsonl(dir_ / "events.jsonl");
}

}  // namespace triage
