#include "proofgrade/feedback.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/prng.hpp"

namespace proofgrade {
namespace {

using nlohmann::json;

ProblemFeedback make_default() {
  ProblemFeedback fb;
  fb.rubric_descriptions = default_rubric_descriptions();
  fb.failure_feedback = {
      "It appears your identification of the base case(s) is missing or incorrect.",
      "It appears your proof of the base case(s) is missing or incorrect.",
      "It appears your statement of the inductive hypothesis is missing or incorrect.",
      "It appears your inductive hypothesis is missing or incorrect.",
      "It appears your goal for the inductive step is missing or incorrect.",
      "It appears your breakdown of the inductive step is missing or incorrect.",
      "It appears your application of the inductive hypothesis is missing or incorrect.",
  };
  fb.bands = {
      {0.0, "Your proof needs more work."},
      {40.0, "You're making progress."},
      {70.0, "You are almost there!"},
      {100.0, "All rubric points passed. Well done!"},
  };
  return fb;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

ProblemFeedback parse_entry(const json& obj, const ProblemFeedback& base,
                            const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::Format, where + ": entry must be an object");
  ProblemFeedback fb = base;
  auto read7 = [&](const char* key, std::array<std::string, kRubricCount>& dst) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_array() || it->size() != kRubricCount)
      throw Error(ErrorKind::Format, where + ": '" + key + "' must list 7 strings");
    for (std::size_t i = 0; i < kRubricCount; ++i) {
      if (!(*it)[i].is_string())
        throw Error(ErrorKind::Format, where + ": '" + key + "' must list 7 strings");
      dst[i] = (*it)[i].get<std::string>();
    }
  };
  read7("rubric_descriptions", fb.rubric_descriptions);
  read7("failure_feedback", fb.failure_feedback);
  if (auto it = obj.find("bands"); it != obj.end()) {
    if (!it->is_array()) throw Error(ErrorKind::Format, where + ": 'bands' must be an array");
    fb.bands.clear();
    for (const auto& b : *it) {
      if (!b.is_object() || !b.contains("lower") || !b.contains("message") ||
          !b["lower"].is_number() || !b["message"].is_string())
        throw Error(ErrorKind::Format,
                    where + ": each band needs a numeric 'lower' and a string 'message'");
      fb.bands.push_back({b["lower"].get<double>(), b["message"].get<std::string>()});
    }
  }
  try {
    fb.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, where + ": " + e.what());
  }
  return fb;
}

}  // namespace

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::SelfEval: return "SelfEval";
    case Strategy::FirstIncorrect: return "First";
    case Strategy::RandomIncorrect: return "Random";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  const std::string t = lower(text);
  if (t == "selfeval" || t == "self-eval" || t == "self_eval") return Strategy::SelfEval;
  if (t == "first" || t == "firstincorrect") return Strategy::FirstIncorrect;
  if (t == "random" || t == "randomincorrect") return Strategy::RandomIncorrect;
  throw Error(ErrorKind::Input, "unknown group '" + std::string(text) +
                                    "' (expected SelfEval, First or Random)");
}

void ProblemFeedback::validate() const {
  if (bands.empty()) throw Error(ErrorKind::Format, "feedback bands are empty");
  if (bands.front().lower != 0.0)
    throw Error(ErrorKind::Format, "the first feedback band must start at 0");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (!(bands[i].lower >= 0.0 && bands[i].lower <= 100.0))
      throw Error(ErrorKind::Format, "feedback band thresholds must lie in [0, 100]");
    if (i > 0 && !(bands[i].lower > bands[i - 1].lower))
      throw Error(ErrorKind::Format, "feedback band thresholds must strictly increase");
    if (bands[i].message.empty())
      throw Error(ErrorKind::Format, "feedback band message is empty");
  }
  for (std::size_t i = 0; i < kRubricCount; ++i)
    if (rubric_descriptions[i].empty() || failure_feedback[i].empty())
      throw Error(ErrorKind::Format, "rubric " + rubric_label(i) +
                                         " lacks a description or failure sentence");
}

const ProblemFeedback& default_problem_feedback() {
  static const ProblemFeedback kDefault = make_default();
  return kDefault;
}

const ProblemFeedback& FeedbackCatalog::for_problem(std::string_view problem_id) const {
  auto it = entries_.find(problem_id);
  return it == entries_.end() ? fallback_ : it->second;
}

void FeedbackCatalog::set(std::string problem_id, ProblemFeedback feedback) {
  feedback.validate();
  entries_.insert_or_assign(std::move(problem_id), std::move(feedback));
}

bool FeedbackCatalog::contains(std::string_view problem_id) const {
  return entries_.find(problem_id) != entries_.end();
}

FeedbackCatalog FeedbackCatalog::parse(std::istream& in, std::string_view source_name) {
  const std::string src(source_name);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Format, src + ": malformed catalog: " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::Format, src + ": catalog must be a JSON object");
  FeedbackCatalog catalog;
  if (auto it = doc.find("default"); it != doc.end())
    catalog.fallback_ = parse_entry(*it, default_problem_feedback(), src + ": default");
  if (auto it = doc.find("problems"); it != doc.end()) {
    if (!it->is_object()) throw Error(ErrorKind::Format, src + ": 'problems' must be an object");
    for (const auto& [id, entry] : it->items())
      catalog.entries_[id] = parse_entry(entry, catalog.fallback_, src + ": problem " + id);
  }
  return catalog;
}

FeedbackCatalog FeedbackCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "catalog file not found: " + path.string());
  return parse(in, path.string());
}

FeedbackCatalog FeedbackCatalog::from_problems(const std::vector<Problem>& problems) {
  FeedbackCatalog catalog;
  for (const auto& p : problems) {
    ProblemFeedback fb = default_problem_feedback();
    fb.rubric_descriptions = p.rubric_descriptions;
    catalog.set(p.problem_id, std::move(fb));
  }
  return catalog;
}

double score_percent(const RubricVector& rubric) {
  return 100.0 * static_cast<double>(rubric.passed()) / static_cast<double>(kRubricCount);
}

const std::string& general_message(double score, const ProblemFeedback& feedback) {
  if (feedback.bands.empty() || feedback.bands.front().lower != 0.0)
    throw Error(ErrorKind::Format, "malformed feedback bands");
  if (!(score >= 0.0 && score <= 100.0))
    throw Error(ErrorKind::Input, "score outside [0, 100]");
  const FeedbackBand* chosen = &feedback.bands.front();
  for (const auto& band : feedback.bands)
    if (score >= band.lower) chosen = &band;
  return chosen->message;
}

FeedbackBundle select_feedback(const RubricVector& rubric, Strategy strategy,
                               const ProblemFeedback& feedback, PortableRng* rng) {
  FeedbackBundle bundle;
  bundle.mode = strategy;
  if (strategy == Strategy::SelfEval) {
    bundle.general_message = std::string(kSelfEvalMessage);
    bundle.rubric_checklist.assign(feedback.rubric_descriptions.begin(),
                                   feedback.rubric_descriptions.end());
    return bundle;
  }

  const double score = score_percent(rubric);
  bundle.score_percent = score;
  bundle.general_message = general_message(score, feedback);

  std::vector<std::size_t> incorrect;
  for (std::size_t i = 0; i < kRubricCount; ++i)
    if (rubric[i] == 0) incorrect.push_back(i);
  if (incorrect.empty()) return bundle;

  std::size_t chosen = incorrect.front();
  if (strategy == Strategy::RandomIncorrect) {
    if (rng == nullptr)
      throw Error(ErrorKind::Input, "the Random strategy needs a random generator");
    chosen = incorrect[rng->bounded(incorrect.size())];
  }
  bundle.revealed.push_back({chosen, feedback.failure_feedback[chosen]});
  return bundle;
}

std::uint64_t random_feedback_seed(std::string_view student_id, std::string_view problem_id,
                                   std::string_view body_hash) {
  constexpr std::string_view kSep("\x1f", 1);
  std::uint64_t h = fnv1a64(student_id);
  h = fnv1a64(kSep, h);
  h = fnv1a64(problem_id, h);
  h = fnv1a64(kSep, h);
  h = fnv1a64(body_hash, h);
  return fnv1a64(kSep, h);
}

}  // namespace proofgrade
