#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "proofgrade/grading_service.hpp"

namespace proofgrade {

struct HttpOptions {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  std::filesystem::path static_dir;
  int retry_after_seconds = 30;
  std::size_t max_body_bytes = 64 * 1024;
};

/// JSON API over a GradingService:
///   GET  /api/problems
///   POST /api/sessions                      {student_id, roster_group?}
///   POST /api/problems/{id}/attempts        {student_id, body_markdown}
///   GET  /api/students/{id}/attempts
/// plus static files from `static_dir` when set.
class HttpServer {
 public:
  HttpServer(GradingService& service, HttpOptions options);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and returns the bound port. Throws Error(Config) on failure.
  int bind();
  /// Blocks until stop().
  void listen();
  void stop();
  /// True once listen() is accepting connections.
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace proofgrade
