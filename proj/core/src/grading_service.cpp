#include "proofgrade/grading_service.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>

#include "proofgrade/digest.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/prng.hpp"

namespace proofgrade {

Strategy hashed_group(std::string_view student_id) {
  switch (fnv1a64(student_id) % 3) {
    case 0: return Strategy::SelfEval;
    case 1: return Strategy::FirstIncorrect;
    default: return Strategy::RandomIncorrect;
  }
}

std::map<std::string, Strategy, std::less<>> load_roster(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "roster file not found: " + path.string());
  std::map<std::string, Strategy, std::less<>> roster;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    const std::string where = fmt::format("{}:{}", path.string(), lineno);
    if (comma == std::string::npos) throw Error(ErrorKind::Format, where + ": expected student_id,group");
    auto strip = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    const std::string id = strip(line.substr(0, comma));
    const std::string group = strip(line.substr(comma + 1));
    if (lineno == 1 && id == "student_id") continue;
    try {
      roster[id] = parse_strategy(group);
    } catch (const Error& e) {
      throw Error(ErrorKind::Format, where + ": " + e.what());
    }
  }
  return roster;
}

GradingService::GradingService(std::vector<Problem> problems,
                               std::map<std::string, ProblemGrader, std::less<>> graders,
                               std::shared_ptr<Embedder> embedder, FeedbackCatalog catalog,
                               AttemptLog& log, ServiceOptions options)
    : problems_(std::move(problems)),
      graders_(std::move(graders)),
      embedder_(std::move(embedder)),
      catalog_(std::move(catalog)),
      log_(log),
      options_(std::move(options)) {
  for (const auto& [id, g] : graders_) {
    if (!embedder_)
      throw Error(ErrorKind::Config, "graders are loaded but no embedding provider is set");
    if (g.provider_id != embedder_->provider().config().provider_id)
      throw Error(ErrorKind::Conflict,
                  fmt::format("model for {} was trained with provider '{}' but the server "
                              "uses '{}'",
                              id, g.provider_id, embedder_->provider().config().provider_id));
  }
  for (const auto& a : log_.records()) {
    sessions_.try_emplace(a.student_id, Session{a.student_id, a.group, a.ts_ms});
    auto& next = next_index_[{a.student_id, a.problem_id}];
    next = std::max(next, a.attempt_index + 1);
    history_[a.student_id].push_back(a);
  }
}

std::int64_t GradingService::now() const {
  if (options_.now_ms) return options_.now_ms();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool GradingService::has_grader(std::string_view problem_id) const {
  return graders_.find(problem_id) != graders_.end();
}

Session GradingService::open_session(const std::string& student_id,
                                     std::optional<Strategy> roster_group) {
  if (student_id.empty() || std::all_of(student_id.begin(), student_id.end(), [](unsigned char c) {
        return std::isspace(c) != 0;
      }))
    throw Error(ErrorKind::Input, "student_id must be non-empty");
  std::lock_guard lock(mu_);
  if (auto it = sessions_.find(student_id); it != sessions_.end()) {
    if (roster_group && *roster_group != it->second.group)
      throw Error(ErrorKind::Conflict,
                  fmt::format("student {} is already assigned to {}", student_id,
                              to_string(it->second.group)));
    return it->second;
  }
  Strategy group;
  if (auto r = options_.roster.find(student_id); r != options_.roster.end()) {
    if (roster_group && *roster_group != r->second)
      throw Error(ErrorKind::Conflict,
                  fmt::format("student {} is listed in the roster as {}", student_id,
                              to_string(r->second)));
    group = r->second;
  } else {
    group = roster_group.value_or(hashed_group(student_id));
  }
  Session s{student_id, group, now()};
  sessions_.emplace(student_id, s);
  return s;
}

std::optional<Session> GradingService::session(std::string_view student_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(student_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

Submission GradingService::submit(const std::string& student_id, const std::string& problem_id,
                                  const std::string& body_markdown) {
  const auto started = std::chrono::steady_clock::now();
  if (body_markdown.size() > options_.max_body_bytes)
    throw Error(ErrorKind::Input, fmt::format("proof body exceeds {} bytes",
                                              options_.max_body_bytes));
  const auto sess = session(student_id);
  if (!sess) throw Error(ErrorKind::NotFound, "no session for student " + student_id);
  const auto pit = std::find_if(problems_.begin(), problems_.end(),
                                [&](const Problem& p) { return p.problem_id == problem_id; });
  if (pit == problems_.end()) throw Error(ErrorKind::NotFound, "unknown problem " + problem_id);

  Submission out;
  Attempt& a = out.attempt;
  a.student_id = student_id;
  a.group = sess->group;
  a.problem_id = problem_id;
  a.body_markdown = body_markdown;
  a.body_hash = to_hex(sha256(body_markdown));

  const ProblemFeedback& fb = catalog_.for_problem(problem_id);
  auto git = graders_.find(problem_id);
  if (git == graders_.end()) {
    if (sess->group != Strategy::SelfEval)
      throw Error(ErrorKind::Config, "no grader is loaded for problem " + problem_id);
    out.feedback = select_feedback(RubricVector{}, Strategy::SelfEval, fb, nullptr);
  } else {
    const GradeResult graded = grade_proof(git->second, body_markdown, *embedder_);
    out.empty_submission = graded.empty_submission;
    a.rubric = graded.rubric;
    a.score_percent = score_percent(graded.rubric);
    PortableRng rng(random_feedback_seed(student_id, problem_id, a.body_hash));
    out.feedback = select_feedback(graded.rubric, sess->group, fb, &rng);
    if (!out.feedback.revealed.empty()) a.revealed_rubric = out.feedback.revealed.front().rubric;
  }

  std::lock_guard lock(mu_);
  auto& next = next_index_[{student_id, problem_id}];
  if (options_.max_attempts > 0 && next >= options_.max_attempts)
    throw Error(ErrorKind::Conflict, fmt::format("attempt limit of {} reached for {}",
                                                 options_.max_attempts, problem_id));
  a.attempt_index = next;
  a.ts_ms = now();
  a.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                           started)
                     .count();
  log_.append(a);
  ++next;
  history_[student_id].push_back(a);
  return out;
}

std::vector<Attempt> GradingService::history(std::string_view student_id) const {
  std::lock_guard lock(mu_);
  if (sessions_.find(student_id) == sessions_.end())
    throw Error(ErrorKind::NotFound, "unknown student " + std::string(student_id));
  auto it = history_.find(student_id);
  if (it == history_.end()) return {};
  return it->second;
}

}  // namespace proofgrade
