#include "proofgrade/http_server.hpp"

#include <fmt/format.h>

#include "httplib.h"
#include "json.hpp"
#include "proofgrade/error.hpp"

namespace proofgrade {
namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind,
                const std::string& message) {
  send_json(res, status, {{"error", {{"kind", kind}, {"message", message}}}});
}

json rubric_json(const RubricVector& r) {
  json bits = json::array();
  for (std::size_t i = 0; i < kRubricCount; ++i) bits.push_back(static_cast<int>(r[i]));
  return bits;
}

json feedback_json(const FeedbackBundle& fb) {
  json j;
  j["mode"] = std::string(to_string(fb.mode));
  j["general_message"] = fb.general_message;
  if (fb.score_percent) j["score_percent"] = *fb.score_percent;
  json revealed = json::array();
  for (const auto& r : fb.revealed)
    revealed.push_back({{"rubric", rubric_label(r.rubric)}, {"message", r.message}});
  j["revealed"] = std::move(revealed);
  if (fb.mode == Strategy::SelfEval) j["rubric_checklist"] = fb.rubric_checklist;
  return j;
}

json attempt_json(const Attempt& a) {
  json j;
  j["attempt_index"] = a.attempt_index;
  j["problem_id"] = a.problem_id;
  j["ts"] = a.ts_ms;
  j["body_markdown"] = a.body_markdown;
  j["body_hash"] = a.body_hash;
  if (a.group != Strategy::SelfEval) {
    if (a.score_percent) j["score_percent"] = *a.score_percent;
    if (a.rubric) j["rubric"] = rubric_json(*a.rubric);
    if (a.revealed_rubric) j["revealed_rubric"] = rubric_label(*a.revealed_rubric);
  }
  return j;
}

json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object())
    throw Error(ErrorKind::Input, "request body must be a JSON object");
  return body;
}

std::string string_field(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string())
    throw Error(ErrorKind::Input, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

struct HttpServer::Impl {
  GradingService& service;
  HttpOptions options;
  httplib::Server server;

  Impl(GradingService& s, HttpOptions o) : service(s), options(std::move(o)) {}

  template <typename F>
  httplib::Server::Handler guarded(F handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const ProviderError& e) {
        if (e.unavailable()) {
          res.set_header("Retry-After", std::to_string(options.retry_after_seconds));
          send_error(res, 503, "provider_unavailable", e.what());
        } else {
          send_error(res, 502, "provider", e.what());
        }
      } catch (const Error& e) {
        int status = 500;
        switch (e.kind()) {
          case ErrorKind::Input:
          case ErrorKind::Format: status = 400; break;
          case ErrorKind::NotFound: status = 404; break;
          case ErrorKind::Conflict: status = 409; break;
          default: status = 500; break;
        }
        send_error(res, status, to_string(e.kind()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    // Leave room for the JSON envelope around the proof body.
    server.set_payload_max_length(options.max_body_bytes * 6 + 4096);

    server.Get("/api/problems", guarded([this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      for (const auto& p : service.problems())
        list.push_back({{"problem_id", p.problem_id},
                        {"statement_markdown", p.statement_markdown}});
      send_json(res, 200, list);
    }));

    server.Post("/api/sessions", guarded([this](const httplib::Request& req,
                                                httplib::Response& res) {
      const json body = parse_body(req);
      const std::string student = string_field(body, "student_id");
      std::optional<Strategy> group;
      if (auto it = body.find("roster_group"); it != body.end() && !it->is_null()) {
        if (!it->is_string()) throw Error(ErrorKind::Input, "field 'roster_group' must be a string");
        group = parse_strategy(it->get<std::string>());
      }
      const Session s = service.open_session(student, group);
      send_json(res, 200, {{"student_id", s.student_id},
                           {"group", std::string(to_string(s.group))},
                           {"created_ms", s.created_ms}});
    }));

    server.Post(R"(/api/problems/([^/]+)/attempts)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const std::string student = string_field(body, "student_id");
                  const std::string proof = string_field(body, "body_markdown");
                  if (proof.size() > options.max_body_bytes) {
                    send_error(res, 413, "input",
                               fmt::format("proof body exceeds {} bytes", options.max_body_bytes));
                    return;
                  }
                  const Submission sub = service.submit(student, req.matches[1], proof);
                  json j;
                  j["student_id"] = student;
                  j["problem_id"] = sub.attempt.problem_id;
                  j["attempt_index"] = sub.attempt.attempt_index;
                  j["group"] = std::string(to_string(sub.attempt.group));
                  j["empty_submission"] = sub.empty_submission;
                  if (sub.attempt.group != Strategy::SelfEval) {
                    if (sub.attempt.score_percent) j["score_percent"] = *sub.attempt.score_percent;
                    if (sub.attempt.rubric) j["rubric"] = rubric_json(*sub.attempt.rubric);
                  }
                  j["feedback"] = feedback_json(sub.feedback);
                  send_json(res, 200, j);
                }));

    server.Get(R"(/api/students/([^/]+)/attempts)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string student = req.matches[1];
                 const auto attempts = service.history(student);
                 const auto s = service.session(student);
                 json list = json::array();
                 for (const auto& a : attempts) list.push_back(attempt_json(a));
                 send_json(res, 200, {{"student_id", student},
                                      {"group", std::string(to_string(s->group))},
                                      {"attempts", std::move(list)}});
               }));

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 413) {
        send_error(res, 413, "input", "request body too large");
      } else if (res.status == 404) {
        send_error(res, 404, "not_found", "no such resource");
      }
    });

    if (!options.static_dir.empty()) {
      if (!server.set_mount_point("/", options.static_dir.string()))
        throw Error(ErrorKind::Config,
                    "static directory not found: " + options.static_dir.string());
    }
  }
};

HttpServer::HttpServer(GradingService& service, HttpOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  int port = impl_->options.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (!impl_->server.bind_to_port(impl_->options.host, port)) {
    port = -1;
  }
  if (port < 0)
    throw Error(ErrorKind::Config, fmt::format("cannot bind {}:{}", impl_->options.host,
                                               impl_->options.port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

bool HttpServer::running() const { return impl_ && impl_->server.is_running(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace proofgrade
