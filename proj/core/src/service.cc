#include "triage/service.h"

#include <condition_variable>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "triage/text.h"

namespace triage {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnauthorized: return 403;
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownRecord: return 404;
    case ErrorCode::kInvalidPhase:
    case ErrorCode::kPreviousIncomplete:
    case ErrorCode::kQueueIncomplete:
    case ErrorCode::kConflictPending:
    case ErrorCode::kLeakageDetected:
    case ErrorCode::kNoDataset: return 409;
    case ErrorCode::kSpanNotFound:
    case ErrorCode::kAmbiguousSpan:
    case ErrorCode::kEmptyResidual:
    case ErrorCode::kSpanLacksSignal:
    case ErrorCode::kPositionOutOfBounds:
    case ErrorCode::kRatioUnreachable:
    case ErrorCode::kSingleClassDataset:
    case ErrorCode::kSingleClass:
    case ErrorCode::kDomainMismatch: return 422;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kConfig: return 400;
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kEmbedderUnavailable: return 503;
    default: return 500;
  }
}

nlohmann::json error_body(const Error& e) {
  return {{"code", to_string(e.code())}, {"message", e.what()}};
}

std::string token_aligned_span(const std::string& text, size_t begin, size_t end) {
  if (begin >= end || end > text.size()) {
    fail(ErrorCode::kInvalidArgument, "character range is empty or outside the text");
  }
  while (begin > 0 && text[begin - 1] != ' ') --begin;
  while (end < text.size() && text[end] != ' ') ++end;
  return text::collapse_whitespace(text.substr(begin, end - begin));
}

struct Service::Impl {
  std::shared_ptr<Project> project;
  ServiceConfig config;
  httplib::Server server;
  std::mutex jobs_mu;
  std::condition_variable jobs_cv;
  size_t running = 0;
  std::map<int, std::string> training_errors;
  std::vector<std::thread> threads;

  void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  // Resolves the bearer token or throws kUnauthorized.
  OracleIdentity caller(const httplib::Request& req) {
    const auto header = req.get_header_value("Authorization");
    const std::string prefix = "Bearer ";
    if (header.rfind(prefix, 0) != 0) fail(ErrorCode::kUnauthorized, "missing bearer token");
    const auto it = config.tokens.find(header.substr(prefix.size()));
    if (it == config.tokens.end()) fail(ErrorCode::kUnauthorized, "unknown bearer token");
    return it->second;
  }

  nlohmann::json body_of(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
      auto j = nlohmann::json::parse(req.body);
      if (!j.is_object()) fail(ErrorCode::kInvalidArgument, "request body must be a JSON object");
      return j;
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kInvalidArgument, std::string("malformed JSON: ") + e.what());
    }
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  Handler guarded(Handler h) {
    return [this, h](const httplib::Request& req, httplib::Response& res) {
      try {
        caller(req);
        h(req, res);
      } catch (const Error& e) {
        reply(res, http_status(e.code()), error_body(e));
      } catch (const nlohmann::json::exception& e) {
        reply(res, 400, {{"code", to_string(ErrorCode::kInvalidArgument)}, {"message", e.what()}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"code", to_string(ErrorCode::kInvariantViolation)}, {"message", e.what()}});
      }
    };
  }

  nlohmann::json rounds_json() {
    const auto state = project->state();
    nlohmann::json out = nlohmann::json::array();
    std::lock_guard lock(jobs_mu);
    for (const auto& r : state.rounds) {
      nlohmann::json j = r;
      if (const auto it = training_errors.find(r.round); it != training_errors.end()) {
        j["training_error"] = it->second;
      }
      out.push_back(j);
    }
    return out;
  }

  void train_async(int round) {
    std::lock_guard lock(jobs_mu);
    ++running;
    threads.emplace_back([this, round] {
      std::string error;
      try {
        project->run_training(round);
      } catch (const std::exception& e) {
        error = e.what();
      }
      std::lock_guard inner(jobs_mu);
      if (!error.empty()) training_errors[round] = error;
      --running;
      jobs_cv.notify_all();
    });
  }

  void routes() {
    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"status", "ok"}});
    });

    server.Get("/rounds", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, rounds_json());
    }));

    server.Post("/rounds", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_of(req);
      std::vector<TrainMode> modes;
      if (body.contains("modes")) {
        for (const auto& m : body.at("modes")) modes.push_back(parse_mode(m.get<std::string>()));
      } else {
        modes.push_back(parse_mode(body.value("mode", "from_scratch")));
      }
      if (body.contains("config") && !body.at("config").is_null() &&
          !body.at("config").empty()) {
        fail(ErrorCode::kInvalidArgument, "per-round config overrides are not supported");
      }
      const int round = project->start_round(modes);
      train_async(round);
      reply(res, 202, {{"round", round}, {"phase", to_string(Phase::kTraining)}});
    }));

    server.Post(R"(/rounds/(\d+)/advance)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const int round = std::stoi(req.matches[1]);
                  reply(res, 200, project->advance(round));
                }));

    server.Get("/queue/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto who = caller(req);
      std::optional<Strategy> strategy;
      if (req.has_param("strategy")) strategy = parse_strategy(req.get_param_value("strategy"));
      const auto item = project->queue_next(strategy, who.id);
      if (!item) {
        reply(res, 200, {{"item", nullptr}, {"remaining", 0}});
        return;
      }
      reply(res, 200, {{"item", *item}, {"remaining", project->pending_records().size()}});
    }));

    server.Post("/labels", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto who = caller(req);
      const auto body = body_of(req);
      const auto oracle_id = body.at("oracle_id").get<std::string>();
      if (oracle_id != who.id) fail(ErrorCode::kUnauthorized, "oracle_id does not match the token");
      const Label label = parse_label(body.at("label").get<std::string>());
      const bool adjudicate = body.value("adjudicate", false);
      const auto ack = project->submit_label(body.at("record_id").get<std::string>(), label, who,
                                             adjudicate);
      reply(res, ack.status == "duplicate" ? 200 : 201, ack);
    }));

    server.Post("/counterfactuals",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto who = caller(req);
                  const auto body = body_of(req);
                  const auto source_id = body.at("source_id").get<std::string>();
                  const auto direction = parse_direction(body.at("direction").get<std::string>());
                  std::string span;
                  const auto& s = body.at("span");
                  if (s.is_string()) {
                    span = s.get<std::string>();
                  } else {
                    const auto record = project->find_record(source_id);
                    if (!record) fail(ErrorCode::kUnknownRecord, "unknown record " + source_id);
                    span = token_aligned_span(record->clean_text, s.at("start").get<size_t>(),
                                              s.at("end").get<size_t>());
                  }
                  std::optional<size_t> position;
                  if (body.contains("position") && !body.at("position").is_null()) {
                    position = body.at("position").get<size_t>();
                  }
                  const auto result =
                      project->author_counterfactual(source_id, direction, span, position, who);
                  reply(res, 201, {{"pair", result.pair}, {"record", result.synthetic}});
                }));

    server.Get("/metrics", guarded([this](const httplib::Request& req, httplib::Response& res) {
      double beta = kReportBeta;
      if (req.has_param("beta")) {
        try {
          beta = std::stod(req.get_param_value("beta"));
        } catch (const std::exception&) {
          fail(ErrorCode::kInvalidArgument, "beta must be a number");
        }
        if (!(beta > 0.0)) fail(ErrorCode::kInvalidArgument, "beta must be positive");
      }
      const auto state = project->state();
      const nlohmann::json evaluation{{"size", state.evaluation.size()},
                                      {"positive", state.evaluation.positive_count},
                                      {"negative", state.evaluation.negative_count}};
      if (req.has_param("round")) {
        const int round = std::stoi(req.get_param_value("round"));
        reply(res, 200, {{"round", round},
                         {"beta", beta},
                         {"evaluation", evaluation},
                         {"row", project->round_metrics(round, beta)},
                         {"baseline", project->baseline_metrics(beta)}});
        return;
      }
      reply(res, 200, {{"beta", beta}, {"evaluation", evaluation},
                       {"rows", project->report_rows(beta)},
                       {"datasets", project->dataset_table()}});
    }));

    server.Get(R"(/records/([A-Za-z0-9_\-]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 reply(res, 200, project->record_view(req.matches[1]));
               }));

    server.Get("/conflicts", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, project->conflicts());
    }));
  }
};

Service::Service(std::shared_ptr<Project> project, ServiceConfig config)
    : impl_(std::make_unique<Impl>()) {
  if (!project) fail(ErrorCode::kInvalidArgument, "service needs a project");
  impl_->project = std::move(project);
  impl_->config = std::move(config);
  impl_->routes();
}

Service::~Service() {
  stop();
  wait_idle();
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) fail(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    fail(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::run() {
  if (!impl_->server.listen_after_bind()) fail(ErrorCode::kIo, "server stopped unexpectedly");
}

void Service::stop() { impl_->server.stop(); }

void Service::wait_idle() {
  std::unique_lock lock(impl_->jobs_mu);
  impl_->jobs_cv.wait(lock, [this] { return impl_->running == 0; });
}

}  // namespace triage
