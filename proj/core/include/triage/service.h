#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "triage/config.h"
#include "triage/error.h"
#include "triage/project.h"

namespace triage {

// HTTP status used when an Error of `code` reaches the wire.
int http_status(ErrorCode code);
nlohmann::json error_body(const Error& e);

// Maps a character range of `text` outward to whole-token boundaries.
std::string token_aligned_span(const std::string& text, size_t begin, size_t end);

class Service {
 public:
  Service(std::shared_ptr<Project> project, ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds `host`:`port`; port 0 picks a free one. Returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(). Requires bind().
  void run();
  void stop();
  // Blocks until every background training job has finished.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace triage
