#include "triage/classifier.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "httplib.h"
#include "triage/error.h"
#include "triage/metrics.h"
#include "triage/rng.h"

namespace triage {

namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logit(std::span<const double> w, std::span<const double> x) {
  double z = w[x.size()];
  for (size_t i = 0; i < x.size(); ++i) z += w[i] * x[i];
  return z;
}

void check_dimensions(std::span<const double> weights, const Examples& data) {
  for (const auto& x : data.features) {
    if (x.size() + 1 != weights.size()) {
      fail(ErrorCode::kDimensionMismatch,
           "weights have " + std::to_string(weights.size()) + " entries, features " +
               std::to_string(x.size()) + "+1 expected");
    }
  }
}

std::string checkpoint_id(const TrainContext& ctx, size_t step) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", step);
  return ctx.id_prefix + "-s" + buf;
}

void score_on_validation(Checkpoint& c, const Examples& validation) {
  if (validation.size() == 0) {
    c.val_loss = 0.0;
    c.val_auc = 0.5;
    c.val_f1 = 0.0;
    return;
  }
  c.val_loss = log_loss(c.weights, validation);
  std::vector<double> scores;
  ConfusionMatrix cm;
  for (size_t i = 0; i < validation.size(); ++i) {
    const double p = predict_probability(c.weights, validation.features[i]);
    scores.push_back(p);
    const bool predicted = p >= 0.5;
    if (validation.labels[i] == 1) {
      ++(predicted ? cm.tp : cm.fn);
    } else {
      ++(predicted ? cm.fp : cm.tn);
    }
  }
  const bool both = cm.tp + cm.fn > 0 && cm.tn + cm.fp > 0;
  c.val_auc = both ? compute_auc(scores, validation.labels) : 0.5;
  c.val_f1 = metrics(cm, 1.0).f1;
}

void check_two_classes(const Examples& data) {
  const auto positives = std::count(data.labels.begin(), data.labels.end(), 1);
  if (positives == 0 || positives == static_cast<long>(data.labels.size())) {
    fail(ErrorCode::kSingleClassDataset, "training set needs both classes");
  }
}

std::vector<Checkpoint> run_descent(std::vector<double> w, const Examples& data,
                                    const Examples& validation, const TrainConfig& config,
                                    const TrainContext& ctx,
                                    const std::optional<std::string>& parent) {
  const size_t n = data.size();
  const size_t dim = w.size() - 1;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);

  auto make_checkpoint = [&](size_t step) {
    Checkpoint c;
    c.id = checkpoint_id(ctx, step);
    c.round = ctx.round;
    c.step = step;
    c.weights = w;
    c.parent_id = parent;
    c.dataset_version = ctx.dataset_version;
    c.lineage = ctx.lineage;
    score_on_validation(c, validation);
    return c;
  };

  std::vector<Checkpoint> out;
  if (config.epochs == 0) {
    out.push_back(make_checkpoint(0));
    return out;
  }
  std::vector<double> grad(dim + 1);
  size_t step = 0;
  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<size_t>(order));
    for (size_t start = 0; start < n; start += config.batch_size) {
      const size_t end = std::min(n, start + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (size_t k = start; k < end; ++k) {
        const auto& x = data.features[order[k]];
        const double z = logit(w, x);
        const double y = data.labels[order[k]];
        batch_loss += softplus(z) - y * z;
        const double residual = sigmoid(z) - y;
        for (size_t i = 0; i < dim; ++i) grad[i] += residual * x[i];
        grad[dim] += residual;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (size_t i = 0; i < dim; ++i) {
        w[i] -= config.learning_rate * (grad[i] * scale + config.l2 * w[i]);
      }
      w[dim] -= config.learning_rate * grad[dim] * scale;
      ++step;
      if (!std::isfinite(batch_loss) || !std::isfinite(w[dim])) {
        fail(ErrorCode::kNonFiniteLoss, "non-finite loss at step " + std::to_string(step));
      }
      if (step % config.checkpoint_every == 0) out.push_back(make_checkpoint(step));
    }
  }
  return out;
}

}  // namespace

void TrainConfig::validate(size_t train_size, bool allow_zero_epochs) const {
  if (epochs == 0 && !allow_zero_epochs) fail(ErrorCode::kConfig, "train: epochs must be positive");
  if (batch_size == 0) fail(ErrorCode::kConfig, "train: batch_size must be positive");
  if (checkpoint_every == 0) fail(ErrorCode::kConfig, "train: checkpoint_every must be positive");
  if (!(learning_rate > 0.0)) fail(ErrorCode::kConfig, "train: learning_rate must be positive");
  if (l2 < 0.0) fail(ErrorCode::kConfig, "train: l2 must be non-negative");
  const size_t steps_per_epoch = (train_size + batch_size - 1) / batch_size;
  if (epochs > 0 && checkpoint_every > steps_per_epoch * epochs) {
    fail(ErrorCode::kConfig, "train: checkpoint_every exceeds total steps (" +
                                 std::to_string(steps_per_epoch * epochs) + ")");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},           {"batch_size", c.batch_size},
                     {"checkpoint_every", c.checkpoint_every},
                     {"learning_rate", c.learning_rate}, {"l2", c.l2},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.l2 = j.value("l2", c.l2);
  c.seed = j.value("seed", c.seed);
}

nlohmann::json checkpoint_summary(const Checkpoint& c) {
  return nlohmann::json{{"id", c.id},
                        {"round", c.round},
                        {"step", c.step},
                        {"val_loss", c.val_loss},
                        {"val_auc", c.val_auc},
                        {"val_f1", c.val_f1},
                        {"parent_id", c.parent_id ? nlohmann::json(*c.parent_id) : nlohmann::json()},
                        {"dataset_version", c.dataset_version},
                        {"lineage", c.lineage},
                        {"backend", c.backend}};
}

void to_json(nlohmann::json& j, const Checkpoint& c) {
  j = checkpoint_summary(c);
  j["schema_version"] = kCheckpointSchemaVersion;
  j["weights"] = c.weights;
}

void from_json(const nlohmann::json& j, Checkpoint& c) {
  const int schema = j.value("schema_version", kCheckpointSchemaVersion);
  if (schema != kCheckpointSchemaVersion) {
    fail(ErrorCode::kIo, "checkpoint schema " + std::to_string(schema) + " not supported");
  }
  c.id = j.at("id").get<std::string>();
  c.round = j.value("round", 0);
  c.step = j.value("step", size_t{0});
  c.weights = j.value("weights", std::vector<double>{});
  c.val_loss = j.value("val_loss", 0.0);
  c.val_auc = j.value("val_auc", 0.0);
  c.val_f1 = j.value("val_f1", 0.0);
  c.parent_id = j.contains("parent_id") && !j["parent_id"].is_null()
                    ? std::optional<std::string>(j["parent_id"].get<std::string>())
                    : std::nullopt;
  c.dataset_version = j.value("dataset_version", 0);
  c.lineage = j.value("lineage", std::string("from_scratch"));
  c.backend = j.value("backend", std::string("native"));
}

Examples make_examples(std::span<const std::string> ids, std::span<const std::string> texts,
                       std::span<const int> labels, const Embedder& embedder) {
  if (ids.size() != texts.size() || ids.size() != labels.size()) {
    fail(ErrorCode::kInvalidArgument, "make_examples: ids, texts and labels differ in length");
  }
  Examples ex;
  ex.ids.assign(ids.begin(), ids.end());
  ex.labels.assign(labels.begin(), labels.end());
  for (auto& v : embedder.embed_batch(texts)) ex.features.push_back(std::move(v.values));
  return ex;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double predict_probability(std::span<const double> weights, std::span<const double> x) {
  if (weights.size() != x.size() + 1) {
    fail(ErrorCode::kDimensionMismatch, "predict: weight/feature dimension mismatch");
  }
  return sigmoid(logit(weights, x));
}

double log_loss(std::span<const double> weights, const Examples& data) {
  check_dimensions(weights, data);
  if (data.size() == 0) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    const double z = logit(weights, data.features[i]);
    total += softplus(z) - data.labels[i] * z;
  }
  return total / static_cast<double>(data.size());
}

double objective(std::span<const double> weights, const Examples& data, double l2) {
  double penalty = 0.0;
  for (size_t i = 0; i + 1 < weights.size(); ++i) penalty += weights[i] * weights[i];
  return log_loss(weights, data) + 0.5 * l2 * penalty;
}

std::vector<double> objective_gradient(std::span<const double> weights, const Examples& data,
                                       double l2) {
  check_dimensions(weights, data);
  const size_t dim = weights.size() - 1;
  std::vector<double> grad(weights.size(), 0.0);
  for (size_t k = 0; k < data.size(); ++k) {
    const auto& x = data.features[k];
    const double residual = sigmoid(logit(weights, x)) - data.labels[k];
    for (size_t i = 0; i < dim; ++i) grad[i] += residual * x[i];
    grad[dim] += residual;
  }
  const double scale = data.size() ? 1.0 / static_cast<double>(data.size()) : 0.0;
  for (size_t i = 0; i < dim; ++i) grad[i] = grad[i] * scale + l2 * weights[i];
  grad[dim] *= scale;
  return grad;
}

std::vector<Checkpoint> train(const Examples& train_set, const Examples& validation,
                              const TrainConfig& config, const TrainContext& context) {
  config.validate(train_set.size());
  check_two_classes(train_set);
  const size_t dim = train_set.features.front().size();
  std::vector<double> w(dim + 1, 0.0);
  check_dimensions(w, train_set);
  check_dimensions(w, validation);
  return run_descent(std::move(w), train_set, validation, config, context, std::nullopt);
}

std::vector<Checkpoint> resume_train(const Checkpoint& from, const Examples& train_set,
                                     const Examples& validation, const TrainConfig& config,
                                     const TrainContext& context) {
  config.validate(train_set.size(), /*allow_zero_epochs=*/true);
  check_two_classes(train_set);
  check_dimensions(from.weights, train_set);
  check_dimensions(from.weights, validation);
  return run_descent(from.weights, train_set, validation, config, context, from.id);
}

Predictions predict_examples(const Checkpoint& checkpoint, const Examples& data) {
  Predictions out;
  for (size_t i = 0; i < data.size(); ++i) {
    out[data.ids[i]] = predict_probability(checkpoint.weights, data.features[i]);
  }
  return out;
}

Predictions predict(const Checkpoint& checkpoint, std::span<const TriageRecord> records,
                    const Embedder& embedder) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.clean_text);
  const auto vectors = embedder.embed_batch(texts);
  Predictions out;
  for (size_t i = 0; i < records.size(); ++i) {
    out[records[i].id] = predict_probability(checkpoint.weights, vectors[i].values);
  }
  return out;
}

bool checkpoint_precedes(const Checkpoint& a, const Checkpoint& b) {
  if (a.val_f1 != b.val_f1) return a.val_f1 > b.val_f1;
  if (a.val_auc != b.val_auc) return a.val_auc > b.val_auc;
  if (a.val_loss != b.val_loss) return a.val_loss < b.val_loss;
  if (a.step != b.step) return a.step < b.step;
  return a.id < b.id;
}

std::vector<Checkpoint> select_checkpoints(std::span<const Checkpoint> checkpoints,
                                           size_t top_k) {
  if (top_k < 1) fail(ErrorCode::kInvalidArgument, "select_checkpoints: top_k must be >= 1");
  std::vector<Checkpoint> ranked(checkpoints.begin(), checkpoints.end());
  std::stable_sort(ranked.begin(), ranked.end(), checkpoint_precedes);
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

std::vector<Checkpoint> NativeBackend::train(const TrainingJob& job) {
  const Examples train_set =
      make_examples(job.train_ids, job.train_texts, job.train_labels, *embedder_);
  const Examples validation = make_examples(job.validation_ids, job.validation_texts,
                                            job.validation_labels, *embedder_);
  if (job.init) return resume_train(*job.init, train_set, validation, job.config, job.context);
  return triage::train(train_set, validation, job.config, job.context);
}

Predictions NativeBackend::predict(const Checkpoint& checkpoint,
                                   std::span<const TriageRecord> records) {
  return triage::predict(checkpoint, records, *embedder_);
}

namespace {

nlohmann::json split_json(const std::vector<std::string>& ids,
                          const std::vector<std::string>& texts, const std::vector<int>& labels) {
  nlohmann::json rows = nlohmann::json::array();
  for (size_t i = 0; i < ids.size(); ++i) {
    rows.push_back({{"id", ids[i]}, {"text", texts[i]}, {"label", labels[i]}});
  }
  return rows;
}

nlohmann::json call(httplib::Result res, const std::string& what) {
  if (!res) {
    fail(ErrorCode::kBackendUnavailable, what + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200 && res->status != 201 && res->status != 202) {
    fail(ErrorCode::kBackendUnavailable, what + ": HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kBackendUnavailable, what + ": bad reply: " + e.what());
  }
}

}  // namespace

std::vector<Checkpoint> ExternalBackend::train(const TrainingJob& job) {
  httplib::Client client(endpoint_);
  client.set_read_timeout(timeout_s_);
  nlohmann::json body{
      {"dataset",
       {{"version", job.context.dataset_version},
        {"train", split_json(job.train_ids, job.train_texts, job.train_labels)},
        {"validation", split_json(job.validation_ids, job.validation_texts,
                                  job.validation_labels)}}},
      {"config", job.config},
      {"context",
       {{"round", job.context.round},
        {"lineage", job.context.lineage},
        {"parent_checkpoint", job.init ? nlohmann::json(job.init->id) : nlohmann::json()}}}};
  const auto started = call(client.Post("/train", body.dump(), "application/json"), "POST /train");
  const std::string job_id = started.at("job_id").get<std::string>();

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(timeout_s_);
  while (true) {
    const auto status = call(client.Get("/jobs/" + job_id), "GET /jobs/" + job_id);
    const std::string state = status.value("status", std::string("running"));
    if (state == "failed") {
      fail(ErrorCode::kBackendUnavailable,
           "training job " + job_id + " failed: " + status.value("error", std::string()));
    }
    if (state == "done") {
      std::vector<Checkpoint> out;
      for (const auto& row : status.at("checkpoints")) {
        Checkpoint c;
        c.id = row.at("id").get<std::string>();
        c.step = row.value("step", size_t{0});
        c.val_loss = row.value("val_loss", 0.0);
        c.val_auc = row.value("val_auc", 0.0);
        c.val_f1 = row.value("val_f1", 0.0);
        c.round = job.context.round;
        c.dataset_version = job.context.dataset_version;
        c.lineage = job.context.lineage;
        c.backend = "external";
        if (job.init) c.parent_id = job.init->id;
        out.push_back(std::move(c));
      }
      return out;
    }
    if (std::chrono::steady_clock::now() > deadline) {
      fail(ErrorCode::kBackendUnavailable, "training job " + job_id + " timed out");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(poll_ms_));
  }
}

Predictions ExternalBackend::predict(const Checkpoint& checkpoint,
                                     std::span<const TriageRecord> records) {
  httplib::Client client(endpoint_);
  client.set_read_timeout(timeout_s_);
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.clean_text);
  const nlohmann::json body{{"checkpoint_id", checkpoint.id}, {"texts", texts}};
  const auto reply = call(client.Post("/predict", body.dump(), "application/json"), "POST /predict");
  const auto probs = reply.at("probabilities").get<std::vector<double>>();
  if (probs.size() != records.size()) {
    fail(ErrorCode::kBackendUnavailable, "POST /predict: reply length mismatch");
  }
  Predictions out;
  for (size_t i = 0; i < records.size(); ++i) out[records[i].id] = probs[i];
  return out;
}

}  // namespace triage
