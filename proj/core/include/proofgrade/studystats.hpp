#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proofgrade/corpus.hpp"
#include "proofgrade/feedback.hpp"

namespace proofgrade {

/// One graded submission as recorded in the attempt log.
struct Attempt {
  std::int64_t ts_ms = 0;  // Unix epoch milliseconds
  std::string student_id;
  Strategy group = Strategy::SelfEval;
  std::string problem_id;
  std::uint32_t attempt_index = 0;
  /// Absent when no grader was loaded for the problem.
  std::optional<double> score_percent;
  std::optional<RubricVector> rubric;
  std::string body_hash;
  std::optional<std::size_t> revealed_rubric;
  double latency_ms = 0.0;
  std::string body_markdown;
};

/// Reads the server's line-delimited attempt log.
std::vector<Attempt> parse_attempt_log(std::istream& in, std::string_view source_name);
std::vector<Attempt> load_attempt_log(const std::filesystem::path& path);
/// One log line, without the trailing newline.
std::string attempt_to_json_line(const Attempt& attempt);
Attempt attempt_from_json_line(std::string_view line, std::string_view where);

// ---------------------------------------------------------------------------
// Effort screening and per-student summaries

enum class ExclusionReason { NoAttempts, AllBlank, AllTrivial };
std::string_view to_string(ExclusionReason reason) noexcept;

struct Exclusion {
  std::string student_id;
  ExclusionReason reason;
};

struct EffortReport {
  std::vector<std::string> included;
  std::vector<Exclusion> excluded;
};

inline constexpr std::size_t kDefaultMinChars = 20;

/// Number of non-whitespace code points in `text`.
std::size_t substantive_chars(std::string_view text);

/// A student is excluded when every body they submitted is blank or has
/// fewer than `min_chars` non-whitespace characters. Students listed in
/// `roster` without any attempt are excluded as NoAttempts. Output ids are
/// sorted.
EffortReport screen_effort(std::span<const Attempt> attempts,
                           std::size_t min_chars = kDefaultMinChars,
                           std::span<const std::string> roster = {});

struct InitialBest {
  std::string student_id;
  std::string problem_id;
  Strategy group = Strategy::SelfEval;
  double initial = 0.0;
  double best = 0.0;
  std::size_t attempts = 0;
};

/// Per (student, problem): score of the earliest scored attempt and the
/// maximum score. Attempts are ordered by (ts_ms, attempt_index); unscored
/// attempts are ignored. Output sorted by (student, problem).
std::vector<InitialBest> initial_best(std::span<const Attempt> attempts);

// ---------------------------------------------------------------------------
// Tests

struct KruskalWallisResult {
  double h = 0.0;
  double p = 1.0;
  std::size_t df = 0;
  /// All values identical: H is reported as 0 and p as 1.
  bool degenerate = false;
};

/// Rank-based H with average ranks for ties and the tie correction
/// 1 - sum(t^3 - t) / (N^3 - N). Needs >= 2 groups, each non-empty, N >= 3.
KruskalWallisResult kruskal_wallis(std::span<const std::vector<double>> groups);

struct MannWhitneyResult {
  double u = 0.0;  // U statistic of the first sample
  double z = 0.0;
  double p = 1.0;
};

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction. Identical pooled values give z = 0, p = 1.
MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b);

struct PairwiseComparison {
  std::size_t group_a = 0;
  std::size_t group_b = 0;
  MannWhitneyResult test;
  double p_adjusted = 1.0;
};

/// All pairs i < j, Bonferroni-adjusted: min(1, p * number_of_pairs).
std::vector<PairwiseComparison> posthoc_mann_whitney(
    std::span<const std::vector<double>> groups);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Welch's unequal-variance t-test, two-sided.
TTestResult welch_t(std::span<const double> a, std::span<const double> b);

/// Paired t-test on a[i] - b[i], two-sided.
TTestResult paired_t(std::span<const double> a, std::span<const double> b);

struct AnovaResult {
  double f = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double p = 1.0;
};

AnovaResult anova_oneway(std::span<const std::vector<double>> groups);

/// `items[r][c]`: respondent r, item c.
double cronbach_alpha(std::span<const std::vector<double>> items);

// ---------------------------------------------------------------------------
// Least squares

struct OlsResult {
  std::vector<std::string> names;
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  std::vector<double> t;
  std::vector<double> p;
  std::vector<double> residuals;
  double r_squared = 0.0;
  double sigma2 = 0.0;
  std::size_t n = 0;
  std::size_t df_resid = 0;
};

/// Ordinary least squares through the normal equations X'X b = X'y, solved
/// by Gauss-Jordan elimination with partial pivoting, which also yields
/// (X'X)^-1 for the classical standard errors sigma^2 (X'X)^-1 with
/// sigma^2 = SSR / (n - p). R^2 is 1 - SSR / SST with SST about the mean.
/// `x` is row-major n x p. A pivot below 1e-10 times the largest diagonal
/// entry of X'X reports the offending column as rank deficient.
OlsResult ols_fit(std::span<const double> x, std::size_t cols, std::span<const double> y,
                  std::vector<std::string> names);

struct ImprovementObservation {
  double best = 0.0;
  double initial = 0.0;
  std::string problem_id;
  Strategy group = Strategy::SelfEval;
};

struct ImprovementModel {
  std::vector<std::string> problems;
  OlsResult fit;
};

/// BEST = mu_j + alpha * I + beta1 * [Random] + beta2 * [First], one mu per
/// problem (sorted ids), no global intercept. Columns: mu_<problem>...,
/// alpha, beta1, beta2.
ImprovementModel fit_improvement_model(std::span<const ImprovementObservation> rows);
std::vector<ImprovementObservation> improvement_observations(
    std::span<const InitialBest> summaries);

// ---------------------------------------------------------------------------
// Survey

struct LikertResponse {
  std::string student_id;
  Strategy group = Strategy::SelfEval;
  std::string question_id;
  int value = 0;
  bool reverse_coded = false;
};

/// S04 and S05 state a preference against the autograder.
const std::set<std::string, std::less<>>& default_negatively_worded();

/// v for ordinary items; -v for items listed in `negatively_worded` or
/// flagged reverse_coded. Throws on values outside {-2..2}.
std::vector<int> code_likert(std::span<const LikertResponse> responses,
                             const std::set<std::string, std::less<>>& negatively_worded =
                                 default_negatively_worded());

/// "Strongly disagree" -2, "Disagree" -1, "Neutral" 0, "Agree" 1,
/// "Strongly agree" 2, or an integer in that range.
int parse_likert_value(std::string_view text);

/// CSV with header student_id,group,question_id,value.
std::vector<LikertResponse> parse_survey_csv(std::istream& in, std::string_view source_name);
std::vector<LikertResponse> load_survey_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Result tables

struct StudyTablesConfig {
  std::size_t min_chars = kDefaultMinChars;
  bool paired_survey_tests = false;
  std::set<std::string, std::less<>> negatively_worded = default_negatively_worded();
};

struct StudyTables {
  std::string scores_csv;          // Kruskal-Wallis on initial and best scores
  std::string posthoc_csv;         // pairwise Mann-Whitney after Kruskal-Wallis
  std::string regression_csv;      // improvement model coefficients
  std::string survey_pairs_csv;    // human vs autograder items per group
  std::string survey_anova_csv;    // S04-S07 across groups
  std::string reliability_csv;     // Cronbach's alpha per survey subsection
  std::string exclusions_csv;
  std::vector<std::string> notes;  // skipped analyses and why
};

/// Runs every analysis that the available data supports. Attempts are
/// screened first; survey responses of excluded students are dropped.
StudyTables build_study_tables(std::span<const Attempt> attempts,
                               std::span<const LikertResponse> survey,
                               const StudyTablesConfig& config = {});

}  // namespace proofgrade
