#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proofgrade/attempt_log.hpp"
#include "proofgrade/corpus.hpp"
#include "proofgrade/embeddings.hpp"
#include "proofgrade/feedback.hpp"
#include "proofgrade/grader.hpp"

namespace proofgrade {

struct Session {
  std::string student_id;
  Strategy group = Strategy::SelfEval;
  std::int64_t created_ms = 0;
};

/// fnv1a64(student_id) mod 3: 0 SelfEval, 1 First, 2 Random.
Strategy hashed_group(std::string_view student_id);

/// CSV with header student_id,group.
std::map<std::string, Strategy, std::less<>> load_roster(const std::filesystem::path& path);

struct ServiceOptions {
  /// 0 means unlimited.
  std::uint32_t max_attempts = 0;
  std::size_t max_body_bytes = 64 * 1024;
  std::map<std::string, Strategy, std::less<>> roster;
  std::function<std::int64_t()> now_ms;  // defaults to the system clock
};

struct Submission {
  Attempt attempt;
  FeedbackBundle feedback;
  bool empty_submission = false;
};

/// Sessions, grading, feedback selection and logging. Graders, problems and
/// the catalog are immutable after construction; sessions and attempt
/// indices are guarded by one mutex, and the log append happens under it so
/// attempt indices follow log order.
class GradingService {
 public:
  GradingService(std::vector<Problem> problems,
                 std::map<std::string, ProblemGrader, std::less<>> graders,
                 std::shared_ptr<Embedder> embedder, FeedbackCatalog catalog,
                 AttemptLog& log, ServiceOptions options = {});

  const std::vector<Problem>& problems() const noexcept { return problems_; }
  bool has_grader(std::string_view problem_id) const;

  /// Idempotent per student. An explicit group that differs from the stored
  /// one raises Error(Conflict).
  Session open_session(const std::string& student_id,
                       std::optional<Strategy> roster_group = std::nullopt);
  std::optional<Session> session(std::string_view student_id) const;

  /// Throws Error(NotFound) for an unknown session or problem, Error(Input)
  /// for an oversized body, Error(Conflict) when max_attempts is reached,
  /// Error(Config) when a treatment student submits to a problem without a
  /// grader, and propagates ProviderError.
  Submission submit(const std::string& student_id, const std::string& problem_id,
                    const std::string& body_markdown);

  /// Chronological attempts of one student; Error(NotFound) without session.
  std::vector<Attempt> history(std::string_view student_id) const;

 private:
  std::int64_t now() const;

  std::vector<Problem> problems_;
  std::map<std::string, ProblemGrader, std::less<>> graders_;
  std::shared_ptr<Embedder> embedder_;
  FeedbackCatalog catalog_;
  AttemptLog& log_;
  ServiceOptions options_;

  mutable std::mutex mu_;
  std::map<std::string, Session, std::less<>> sessions_;
  std::map<std::pair<std::string, std::string>, std::uint32_t> next_index_;
  std::map<std::string, std::vector<Attempt>, std::less<>> history_;
};

}  // namespace proofgrade
