#include "triage/config.h"

#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "triage/error.h"

namespace triage {

double LoopConfig::validation_addition(int round) const {
  const auto i = static_cast<size_t>(round - 1);
  return round >= 1 && i < validation_additions.size() ? validation_additions[i] : 0.0;
}

std::optional<size_t> LoopConfig::deployment_exposure(int round) const {
  if (deployment_per_round.empty()) return std::nullopt;
  size_t total = 0;
  for (size_t i = 0; i < deployment_per_round.size() && static_cast<int>(i) < round; ++i) {
    total += deployment_per_round[i];
  }
  return total;
}

size_t LoopConfig::counterfactual_negative_count(int round) const {
  const auto i = static_cast<size_t>(round - 1);
  return round >= 1 && i < counterfactual_negatives.size() ? counterfactual_negatives[i] : 0;
}

size_t LoopConfig::counterfactual_positive_count(int round) const {
  const auto i = static_cast<size_t>(round - 1);
  return round >= 1 && i < counterfactual_positives.size() ? counterfactual_positives[i] : 0;
}

void ProjectConfig::validate() const {
  if (corpus.kind != "synthetic" && corpus.kind != "files") {
    fail(ErrorCode::kConfig, "corpus.kind must be 'synthetic' or 'files'");
  }
  if (corpus.kind == "files" && (!corpus.focused || !corpus.deployment)) {
    fail(ErrorCode::kConfig, "corpus.kind = 'files' needs corpus.focused and corpus.deployment");
  }
  if (corpus.kind == "synthetic") corpus.synth.validate();
  rules.validate();
  embedder.validate();
  if (topics.k < 2) fail(ErrorCode::kConfig, "topics.k must be at least 2");
  if (topics.reduce_to && (*topics.reduce_to < 1 || *topics.reduce_to >= topics.k)) {
    fail(ErrorCode::kConfig, "topics.reduce_to must lie in [1, k)");
  }
  if (loop.rounds < 1) fail(ErrorCode::kConfig, "loop.rounds must be at least 1");
  if (loop.top_k < 1) fail(ErrorCode::kConfig, "loop.top_k must be at least 1");
  if (!(loop.ratio_cap > 0.0)) fail(ErrorCode::kConfig, "loop.ratio_cap must be positive");
  for (double s : {loop.validation_share, loop.eval_share, loop.uncertainty_threshold}) {
    if (s < 0.0 || s > 1.0) fail(ErrorCode::kConfig, "loop shares must lie in [0,1]");
  }
  if (loop.labels_required < 1 || loop.labels_required > 2) {
    fail(ErrorCode::kConfig, "loop.labels_required must be 1 or 2");
  }
  if (oracle.kind != "simulated" && oracle.kind != "human") {
    fail(ErrorCode::kConfig, "oracle.kind must be 'simulated' or 'human'");
  }
  if (backend.kind != "native" && backend.kind != "external") {
    fail(ErrorCode::kConfig, "backend.kind must be 'native' or 'external'");
  }
  if (backend.kind == "external" && !backend.endpoint) {
    fail(ErrorCode::kConfig, "backend.kind = 'external' needs backend.endpoint");
  }
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
void read(const toml::node_view<const toml::node>& node, T& out) {
  if (!node) return;
  if constexpr (std::is_same_v<T, bool>) {
    const auto v = node.value<bool>();
    if (!v) throw Error(ErrorCode::kConfig, "expected a boolean");
    out = *v;
  } else if constexpr (std::is_integral_v<T>) {
    const auto v = node.value<int64_t>();
    if (!v) throw Error(ErrorCode::kConfig, "expected an integer");
    if (std::is_unsigned_v<T> && *v < 0) throw Error(ErrorCode::kConfig, "expected a non-negative integer");
    out = static_cast<T>(*v);
  } else if constexpr (std::is_floating_point_v<T>) {
    const auto v = node.value<double>();
    if (!v) throw Error(ErrorCode::kConfig, "expected a number");
    out = *v;
  } else {
    const auto v = node.value<std::string>();
    if (!v) throw Error(ErrorCode::kConfig, "expected a string");
    out = *v;
  }
}

template <typename T>
void read(const toml::node_view<const toml::node>& node, std::optional<T>& out) {
  if (!node) return;
  T v{};
  read(node, v);
  out = v;
}

template <typename T>
void read(const toml::node_view<const toml::node>& node, std::vector<T>& out) {
  if (!node) return;
  const auto* arr = node.as_array();
  if (arr == nullptr) throw Error(ErrorCode::kConfig, "expected an array");
  out.clear();
  for (const auto& item : *arr) {
    T v{};
    read(toml::node_view<const toml::node>(item), v);
    out.push_back(v);
  }
}

// Reads `table.key`, naming the key in any error.
template <typename T>
void field(const toml::node_view<const toml::node>& table, const char* section,
           const char* key, T& out) {
  try {
    read(table[key], out);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, std::string(section) + "." + key + ": " + e.what());
  }
}

void read_mix(const toml::node_view<const toml::node>& t, const char* section, PoolMix& m) {
  field(t, section, "positive", m.positive);
  field(t, section, "keyword_negative", m.keyword_negative);
  field(t, section, "lookalike", m.lookalike);
  field(t, section, "reaction", m.reaction);
}

ProjectConfig from_table(const toml::table& root, const std::filesystem::path& base) {
  ProjectConfig c;
  const toml::node_view<const toml::node> doc(root);

  const auto project = doc["project"];
  field(project, "project", "name", c.name);
  std::string dir = c.project_dir.string();
  field(project, "project", "dir", dir);
  c.project_dir = resolve(base, dir);
  field(project, "project", "seed", c.seed);
  field(project, "project", "clock_origin", c.clock_origin);

  const auto corpus = doc["corpus"];
  field(corpus, "corpus", "kind", c.corpus.kind);
  std::optional<std::string> path;
  field(corpus, "corpus", "focused", path);
  if (path) c.corpus.focused = resolve(base, *path);
  path.reset();
  field(corpus, "corpus", "deployment", path);
  if (path) c.corpus.deployment = resolve(base, *path);
  path.reset();
  field(corpus, "corpus", "oracle_key", path);
  if (path) c.corpus.oracle_key = resolve(base, *path);
  field(corpus, "corpus", "strip_patterns", c.corpus.strip_patterns);

  const auto synth = doc["synth"];
  auto& s = c.corpus.synth;
  field(synth, "synth", "n_focused", s.n_focused);
  field(synth, "synth", "n_deployment", s.n_deployment);
  field(synth, "synth", "off_list_share", s.off_list_share);
  field(synth, "synth", "seed", s.seed);
  field(synth, "synth", "template_pack", s.template_pack);
  read_mix(synth["focused"], "synth.focused", s.focused);
  read_mix(synth["deployment"], "synth.deployment", s.deployment);
  if (const auto* shares = synth["confuser_shares"].as_table()) {
    s.confuser_shares.clear();
    for (const auto& [k, v] : *shares) {
      const auto share = v.value<double>();
      if (!share) fail(ErrorCode::kConfig, "synth.confuser_shares values must be numbers");
      s.confuser_shares[std::string(k.str())] = *share;
    }
  }

  const auto filter = doc["filter"];
  field(filter, "filter", "version", c.rules.version);
  field(filter, "filter", "include_terms", c.rules.include_terms);
  field(filter, "filter", "exclude_phrases", c.rules.exclude_phrases);
  field(filter, "filter", "min_length", c.rules.min_length);

  const auto embed = doc["embedder"];
  std::string kind = "hashed_ngram";
  field(embed, "embedder", "kind", kind);
  if (kind == "external") {
    c.embedder.kind = EmbedderKind::kExternal;
  } else if (kind != "hashed_ngram") {
    fail(ErrorCode::kConfig, "embedder.kind must be 'hashed_ngram' or 'external'");
  }
  field(embed, "embedder", "dim", c.embedder.dim);
  field(embed, "embedder", "ngram_lo", c.embedder.ngram_lo);
  field(embed, "embedder", "ngram_hi", c.embedder.ngram_hi);
  field(embed, "embedder", "seed", c.embedder.seed);
  field(embed, "embedder", "endpoint", c.embedder.endpoint);
  field(embed, "embedder", "max_in_flight", c.embedder.max_in_flight);
  field(embed, "embedder", "request_chunk", c.embedder.request_chunk);
  field(embed, "embedder", "timeout_seconds", c.embedder.timeout_seconds);

  const auto topics = doc["topics"];
  field(topics, "topics", "k", c.topics.k);
  int64_t reduce_to = c.topics.reduce_to ? static_cast<int64_t>(*c.topics.reduce_to) : 0;
  field(topics, "topics", "reduce_to", reduce_to);
  c.topics.reduce_to.reset();
  if (reduce_to > 0) c.topics.reduce_to = static_cast<size_t>(reduce_to);
  field(topics, "topics", "top_n", c.topics.top_n);
  field(topics, "topics", "probe_per_topic", c.topics.probe_per_topic);
  field(topics, "topics", "flag_threshold", c.topics.flag_threshold);
  field(topics, "topics", "seed", c.topics.seed);

  const auto quota = doc["quota"];
  field(quota, "quota", "total", c.quota.total);
  field(quota, "quota", "target_share", c.quota.target_share);
  field(quota, "quota", "per_nontarget_floor", c.quota.per_nontarget_floor);
  field(quota, "quota", "per_topic_cap", c.quota.per_topic_cap);
  field(quota, "quota", "redistribute_residual", c.quota.redistribute_residual);

  const auto train = doc["train"];
  field(train, "train", "epochs", c.train.epochs);
  field(train, "train", "batch_size", c.train.batch_size);
  field(train, "train", "checkpoint_every", c.train.checkpoint_every);
  field(train, "train", "learning_rate", c.train.learning_rate);
  field(train, "train", "l2", c.train.l2);
  field(train, "train", "seed", c.train.seed);

  const auto loop = doc["loop"];
  field(loop, "loop", "rounds", c.loop.rounds);
  field(loop, "loop", "top_k", c.loop.top_k);
  field(loop, "loop", "ratio_cap", c.loop.ratio_cap);
  field(loop, "loop", "uncertainty_threshold", c.loop.uncertainty_threshold);
  field(loop, "loop", "validation_share", c.loop.validation_share);
  field(loop, "loop", "validation_additions", c.loop.validation_additions);
  field(loop, "loop", "eval_share", c.loop.eval_share);
  field(loop, "loop", "eval_from_round", c.loop.eval_from_round);
  field(loop, "loop", "resume_rounds", c.loop.resume_rounds);
  field(loop, "loop", "counterfactual_negatives", c.loop.counterfactual_negatives);
  field(loop, "loop", "counterfactual_positives", c.loop.counterfactual_positives);
  field(loop, "loop", "deployment_per_round", c.loop.deployment_per_round);
  field(loop, "loop", "labels_required", c.loop.labels_required);
  field(loop, "loop", "stop_new_fp_below", c.loop.stop_new_fp_below);
  field(loop, "loop", "seed", c.loop.seed);

  const auto oracle = doc["oracle"];
  field(oracle, "oracle", "kind", c.oracle.kind);
  field(oracle, "oracle", "id", c.oracle.id);
  field(oracle, "oracle", "noise_rate", c.oracle.noise_rate);
  field(oracle, "oracle", "seed", c.oracle.seed);

  const auto backend = doc["backend"];
  field(backend, "backend", "kind", c.backend.kind);
  field(backend, "backend", "endpoint", c.backend.endpoint);

  const auto service = doc["service"];
  field(service, "service", "host", c.service.host);
  field(service, "service", "port", c.service.port);
  if (const auto* tokens = service["tokens"].as_array()) {
    for (const auto& node : *tokens) {
      const auto* t = node.as_table();
      if (t == nullptr) fail(ErrorCode::kConfig, "service.tokens entries must be tables");
      const toml::node_view<const toml::node> v(*t);
      std::string token;
      OracleIdentity who;
      std::string who_kind = "human";
      field(v, "service.tokens", "token", token);
      field(v, "service.tokens", "oracle_id", who.id);
      field(v, "service.tokens", "kind", who_kind);
      field(v, "service.tokens", "adjudicator", who.adjudicator);
      who.kind = parse_oracle_kind(who_kind);
      if (token.empty() || who.id.empty()) {
        fail(ErrorCode::kConfig, "service.tokens entries need token and oracle_id");
      }
      c.service.tokens[token] = who;
    }
  }
  c.validate();
  return c;
}

}  // namespace

ProjectConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir) {
  try {
    const toml::table root = toml::parse(toml_text);
    return from_table(root, base_dir);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error: " << e.description() << " at " << e.source().begin;
    fail(ErrorCode::kConfig, msg.str());
  }
}

ProjectConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

void to_json(nlohmann::json& j, const ProjectConfig& c) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& [token, who] : c.service.tokens) {
    tokens.push_back({{"token", token}, {"oracle", who}});
  }
  j = nlohmann::json{
      {"name", c.name},
      {"project_dir", c.project_dir.string()},
      {"seed", c.seed},
      {"clock_origin", c.clock_origin},
      {"corpus",
       {{"kind", c.corpus.kind},
        {"focused", c.corpus.focused ? nlohmann::json(c.corpus.focused->string()) : nlohmann::json()},
        {"deployment",
         c.corpus.deployment ? nlohmann::json(c.corpus.deployment->string()) : nlohmann::json()},
        {"oracle_key",
         c.corpus.oracle_key ? nlohmann::json(c.corpus.oracle_key->string()) : nlohmann::json()},
        {"synth", c.corpus.synth},
        {"strip_patterns", c.corpus.strip_patterns}}},
      {"rules", c.rules},
      {"embedder", c.embedder},
      {"topics",
       {{"k", c.topics.k},
        {"reduce_to", c.topics.reduce_to ? nlohmann::json(*c.topics.reduce_to) : nlohmann::json()},
        {"top_n", c.topics.top_n},
        {"probe_per_topic", c.topics.probe_per_topic},
        {"flag_threshold", c.topics.flag_threshold},
        {"seed", c.topics.seed}}},
      {"quota",
       {{"total", c.quota.total},
        {"target_share", c.quota.target_share},
        {"per_nontarget_floor", c.quota.per_nontarget_floor},
        {"per_topic_cap",
         c.quota.per_topic_cap ? nlohmann::json(*c.quota.per_topic_cap) : nlohmann::json()},
        {"redistribute_residual", c.quota.redistribute_residual}}},
      {"train", c.train},
      {"loop",
       {{"rounds", c.loop.rounds},
        {"top_k", c.loop.top_k},
        {"ratio_cap", c.loop.ratio_cap},
        {"uncertainty_threshold", c.loop.uncertainty_threshold},
        {"validation_share", c.loop.validation_share},
        {"validation_additions", c.loop.validation_additions},
        {"eval_share", c.loop.eval_share},
        {"eval_from_round", c.loop.eval_from_round},
        {"resume_rounds", c.loop.resume_rounds},
        {"counterfactual_negatives", c.loop.counterfactual_negatives},
        {"counterfactual_positives", c.loop.counterfactual_positives},
        {"deployment_per_round", c.loop.deployment_per_round},
        {"labels_required", c.loop.labels_required},
        {"stop_new_fp_below",
         c.loop.stop_new_fp_below ? nlohmann::json(*c.loop.stop_new_fp_below) : nlohmann::json()},
        {"seed", c.loop.seed}}},
      {"oracle",
       {{"kind", c.oracle.kind},
        {"id", c.oracle.id},
        {"noise_rate", c.oracle.noise_rate},
        {"seed", c.oracle.seed}}},
      {"backend",
       {{"kind", c.backend.kind},
        {"endpoint", c.backend.endpoint ? nlohmann::json(*c.backend.endpoint) : nlohmann::json()}}},
      {"service", {{"host", c.service.host}, {"port", c.service.port}, {"tokens", tokens}}}};
}

namespace {

template <typename T>
std::optional<T> opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

void from_json(const nlohmann::json& j, ProjectConfig& c) {
  c = ProjectConfig{};
  c.name = j.at("name").get<std::string>();
  c.project_dir = j.at("project_dir").get<std::string>();
  c.seed = j.at("seed").get<uint64_t>();
  c.clock_origin = j.at("clock_origin").get<std::string>();
  const auto& corpus = j.at("corpus");
  c.corpus.kind = corpus.at("kind").get<std::string>();
  if (auto p = opt<std::string>(corpus, "focused")) c.corpus.focused = *p;
  if (auto p = opt<std::string>(corpus, "deployment")) c.corpus.deployment = *p;
  if (auto p = opt<std::string>(corpus, "oracle_key")) c.corpus.oracle_key = *p;
  c.corpus.synth = corpus.at("synth").get<CorpusSpec>();
  c.corpus.strip_patterns = corpus.at("strip_patterns").get<std::vector<std::string>>();
  c.rules = j.at("rules").get<FilterRuleSet>();
  c.embedder = j.at("embedder").get<EmbedderSpec>();
  const auto& topics = j.at("topics");
  c.topics.k = topics.at("k").get<size_t>();
  c.topics.reduce_to = opt<size_t>(topics, "reduce_to");
  c.topics.top_n = topics.at("top_n").get<size_t>();
  c.topics.probe_per_topic = topics.at("probe_per_topic").get<size_t>();
  c.topics.flag_threshold = topics.at("flag_threshold").get<double>();
  c.topics.seed = topics.at("seed").get<uint64_t>();
  const auto& quota = j.at("quota");
  c.quota.total = quota.at("total").get<size_t>();
  c.quota.target_share = quota.at("target_share").get<double>();
  c.quota.per_nontarget_floor = quota.at("per_nontarget_floor").get<size_t>();
  c.quota.per_topic_cap = opt<size_t>(quota, "per_topic_cap");
  c.quota.redistribute_residual = quota.at("redistribute_residual").get<bool>();
  c.train = j.at("train").get<TrainConfig>();
  const auto& loop = j.at("loop");
  c.loop.rounds = loop.at("rounds").get<int>();
  c.loop.top_k = loop.at("top_k").get<size_t>();
  c.loop.ratio_cap = loop.at("ratio_cap").get<double>();
  c.loop.uncertainty_threshold = loop.at("uncertainty_threshold").get<double>();
  c.loop.validation_share = loop.at("validation_share").get<double>();
  c.loop.validation_additions = loop.at("validation_additions").get<std::vector<double>>();
  c.loop.eval_share = loop.at("eval_share").get<double>();
  c.loop.eval_from_round = loop.at("eval_from_round").get<int>();
  c.loop.resume_rounds = loop.at("resume_rounds").get<std::vector<int>>();
  c.loop.counterfactual_negatives = loop.at("counterfactual_negatives").get<std::vector<size_t>>();
  c.loop.counterfactual_positives = loop.at("counterfactual_positives").get<std::vector<size_t>>();
  c.loop.deployment_per_round =
      loop.value("deployment_per_round", std::vector<size_t>{});
  c.loop.labels_required = loop.at("labels_required").get<size_t>();
  c.loop.stop_new_fp_below = opt<size_t>(loop, "stop_new_fp_below");
  c.loop.seed = loop.at("seed").get<uint64_t>();
  const auto& oracle = j.at("oracle");
  c.oracle.kind = oracle.at("kind").get<std::string>();
  c.oracle.id = oracle.at("id").get<std::string>();
  c.oracle.noise_rate = oracle.at("noise_rate").get<double>();
  c.oracle.seed = oracle.at("seed").get<uint64_t>();
  const auto& backend = j.at("backend");
  c.backend.kind = backend.at("kind").get<std::string>();
  c.backend.endpoint = opt<std::string>(backend, "endpoint");
  const auto& service = j.at("service");
  c.service.host = service.at("host").get<std::string>();
  c.service.port = service.at("port").get<int>();
  for (const auto& t : service.at("tokens")) {
    c.service.tokens[t.at("token").get<std::string>()] = t.at("oracle").get<OracleIdentity>();
  }
}

}  // namespace triage
