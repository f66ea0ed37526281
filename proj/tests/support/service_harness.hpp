#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <thread>

#include "proofgrade/attempt_log.hpp"
#include "proofgrade/grading_service.hpp"
#include "proofgrade/http_server.hpp"

namespace fixture {

// A grading service on an ephemeral port, running on a background thread.
// P1 and P2 are served; P1 has a constant grader, P2 has none.
struct ServiceHarness {
  struct Options {
    std::string verdict = "1001111";
    std::filesystem::path log_path;  // empty: in-memory log
    proofgrade::ServiceOptions service;
    std::shared_ptr<proofgrade::Embedder> embedder;  // defaults to the test provider
    std::size_t max_body_bytes = 64 * 1024;
  };

  explicit ServiceHarness(Options options);
  ServiceHarness() : ServiceHarness(Options{}) {}
  ~ServiceHarness();

  std::unique_ptr<proofgrade::AttemptLog> log;
  std::unique_ptr<proofgrade::GradingService> service;
  std::unique_ptr<proofgrade::HttpServer> server;
  int port = 0;

 private:
  std::thread thread_;
};

std::vector<proofgrade::Problem> sample_problems();

}  // namespace fixture
