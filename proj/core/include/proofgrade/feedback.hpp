#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proofgrade/corpus.hpp"

namespace proofgrade {

class PortableRng;

/// Experimental condition. Also used as the student's group.
enum class Strategy { SelfEval, FirstIncorrect, RandomIncorrect };

/// "SelfEval", "First", "Random".
std::string_view to_string(Strategy s) noexcept;
/// Accepts the names above (case-insensitive) plus "Self-eval".
Strategy parse_strategy(std::string_view text);

/// Band [lower, next band's lower); the last band runs to 100 inclusive.
struct FeedbackBand {
  double lower = 0.0;
  std::string message;
};

struct ProblemFeedback {
  std::array<std::string, kRubricCount> rubric_descriptions;
  std::array<std::string, kRubricCount> failure_feedback;
  std::vector<FeedbackBand> bands;

  /// Throws Error(Format) unless bands start at 0, strictly increase and stay
  /// within [0, 100], and every sentence is non-empty.
  void validate() const;
};

/// Built-in rubric descriptions, failure sentences and message bands.
const ProblemFeedback& default_problem_feedback();

class FeedbackCatalog {
 public:
  FeedbackCatalog() = default;

  /// Entry for `problem_id`, or the built-in default.
  const ProblemFeedback& for_problem(std::string_view problem_id) const;

  void set(std::string problem_id, ProblemFeedback feedback);
  bool contains(std::string_view problem_id) const;

  /// JSON document:
  ///   {"default": {...}, "problems": {"P1": {...}, ...}}
  /// where each entry may give "rubric_descriptions" (7 strings),
  /// "failure_feedback" (7 strings) and "bands" ([{"lower": x,
  /// "message": s}, ...]); omitted parts fall back to the default entry.
  static FeedbackCatalog parse(std::istream& in, std::string_view source_name);
  static FeedbackCatalog load(const std::filesystem::path& path);

  /// Catalog whose rubric descriptions come from a problems file.
  static FeedbackCatalog from_problems(const std::vector<Problem>& problems);

 private:
  ProblemFeedback fallback_ = default_problem_feedback();
  std::map<std::string, ProblemFeedback, std::less<>> entries_;
};

struct RevealedFeedback {
  std::size_t rubric = 0;
  std::string message;
};

struct FeedbackBundle {
  Strategy mode = Strategy::SelfEval;
  /// Absent for SelfEval.
  std::optional<double> score_percent;
  std::string general_message;
  /// At most one entry; only predicted-incorrect rubrics.
  std::vector<RevealedFeedback> revealed;
  /// SelfEval only: the seven rubric descriptions.
  std::vector<std::string> rubric_checklist;
};

/// Prompt shown to the self-evaluation group in place of machine feedback.
inline constexpr std::string_view kSelfEvalMessage =
    "Check your proof against each rubric point below and revise it until you are "
    "satisfied.";

/// 100 * k / 7 where k is the number of correct rubric points.
double score_percent(const RubricVector& rubric);

/// Message of the band containing `score`.
const std::string& general_message(double score, const ProblemFeedback& feedback);

/// FirstIncorrect reveals the lowest-index incorrect rubric; RandomIncorrect
/// draws uniformly among incorrect rubrics with `rng` (required for that
/// strategy); SelfEval reveals nothing and carries the rubric checklist.
FeedbackBundle select_feedback(const RubricVector& rubric, Strategy strategy,
                               const ProblemFeedback& feedback, PortableRng* rng);

/// Seed for the Random strategy: FNV-1a-64 over student_id, problem_id and
/// the body hash, each followed by a 0x1f separator byte. An unchanged
/// resubmission therefore reveals the same rubric point.
std::uint64_t random_feedback_seed(std::string_view student_id,
                                   std::string_view problem_id,
                                   std::string_view body_hash);

}  // namespace proofgrade
