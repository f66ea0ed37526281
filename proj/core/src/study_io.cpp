#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>

#include "json.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/studystats.hpp"

namespace proofgrade {
namespace {

using nlohmann::ordered_json;

constexpr Strategy kTableGroups[] = {Strategy::SelfEval, Strategy::RandomIncorrect,
                                     Strategy::FirstIncorrect};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_csv_line(std::string_view line, const std::string& where) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorKind::Format, where + ": unterminated quoted field");
  fields.push_back(trim(cur));
  return fields;
}

template <typename T>
T field(const ordered_json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorKind::Format, where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::Format, where + ": field '" + key + "' has the wrong type");
  }
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

struct Summary {
  std::size_t n = 0;
  double mean = std::nan("");
  double sd = std::nan("");
};

Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::size_t group_slot(Strategy g) {
  switch (g) {
    case Strategy::SelfEval: return 0;
    case Strategy::RandomIncorrect: return 1;
    case Strategy::FirstIncorrect: return 2;
  }
  return 0;
}

}  // namespace

std::string attempt_to_json_line(const Attempt& a) {
  ordered_json j;
  j["ts"] = a.ts_ms;
  j["student_id"] = a.student_id;
  j["group"] = std::string(to_string(a.group));
  j["problem_id"] = a.problem_id;
  j["attempt_index"] = a.attempt_index;
  j["score_percent"] = a.score_percent ? ordered_json(*a.score_percent) : ordered_json(nullptr);
  j["rubric"] = a.rubric ? ordered_json(a.rubric->to_string()) : ordered_json(nullptr);
  j["body_hash"] = a.body_hash;
  j["revealed_rubric"] =
      a.revealed_rubric ? ordered_json(rubric_label(*a.revealed_rubric)) : ordered_json(nullptr);
  j["latency_ms"] = a.latency_ms;
  j["body_markdown"] = a.body_markdown;
  return j.dump();
}

Attempt attempt_from_json_line(std::string_view line, std::string_view where_sv) {
  const std::string where(where_sv);
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Format, where + ": malformed record: " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Format, where + ": record must be an object");
  Attempt a;
  a.ts_ms = field<std::int64_t>(j, "ts", where);
  a.student_id = field<std::string>(j, "student_id", where);
  try {
    a.group = parse_strategy(field<std::string>(j, "group", where));
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, where + ": " + e.what());
  }
  a.problem_id = field<std::string>(j, "problem_id", where);
  a.attempt_index = field<std::uint32_t>(j, "attempt_index", where);
  if (auto it = j.find("score_percent"); it != j.end() && !it->is_null())
    a.score_percent = field<double>(j, "score_percent", where);
  if (auto it = j.find("rubric"); it != j.end() && !it->is_null()) {
    const auto bits = field<std::string>(j, "rubric", where);
    if (bits.size() != kRubricCount)
      throw Error(ErrorKind::Format, where + ": field 'rubric' must have 7 digits");
    RubricVector rv;
    for (std::size_t i = 0; i < kRubricCount; ++i) {
      if (bits[i] != '0' && bits[i] != '1')
        throw Error(ErrorKind::Format, where + ": field 'rubric' must contain only 0 and 1");
      rv[i] = static_cast<std::uint8_t>(bits[i] - '0');
    }
    a.rubric = rv;
  }
  a.body_hash = field<std::string>(j, "body_hash", where);
  if (auto it = j.find("revealed_rubric"); it != j.end() && !it->is_null()) {
    try {
      a.revealed_rubric = parse_rubric_label(field<std::string>(j, "revealed_rubric", where));
    } catch (const Error& e) {
      throw Error(ErrorKind::Format, where + ": field 'revealed_rubric': " + e.what());
    }
  }
  if (j.contains("latency_ms")) a.latency_ms = field<double>(j, "latency_ms", where);
  if (j.contains("body_markdown")) a.body_markdown = field<std::string>(j, "body_markdown", where);
  return a;
}

std::vector<Attempt> parse_attempt_log(std::istream& in, std::string_view source_name) {
  std::vector<Attempt> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    out.push_back(
        attempt_from_json_line(line, fmt::format("{}:{}", source_name, lineno)));
  }
  return out;
}

std::vector<Attempt> load_attempt_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "attempt log not found: " + path.string());
  return parse_attempt_log(in, path.string());
}

int parse_likert_value(std::string_view text) {
  const std::string t = lower(trim(text));
  if (t == "strongly disagree") return -2;
  if (t == "disagree") return -1;
  if (t == "neutral") return 0;
  if (t == "agree") return 1;
  if (t == "strongly agree") return 2;
  int v = 0;
  const char* b = t.data();
  const char* e = t.data() + t.size();
  if (!t.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (t.empty() || ec != std::errc() || ptr != e || v < -2 || v > 2)
    throw Error(ErrorKind::Input, "not a Likert value: '" + std::string(text) + "'");
  return v;
}

std::vector<LikertResponse> parse_survey_csv(std::istream& in, std::string_view source_name) {
  const std::string src(source_name);
  std::string line;
  std::size_t lineno = 0;
  std::vector<LikertResponse> out;
  std::map<std::string, std::size_t> col;
  const char* required[] = {"student_id", "group", "question_id", "value"};
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string where = fmt::format("{}:{}", src, lineno);
    auto fields = split_csv_line(line, where);
    if (col.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) col[lower(fields[i])] = i;
      for (const char* r : required)
        if (!col.count(r))
          throw Error(ErrorKind::Format, where + ": header lacks column '" + r + "'");
      continue;
    }
    auto get = [&](const char* name) -> const std::string& {
      const std::size_t i = col.at(name);
      if (i >= fields.size())
        throw Error(ErrorKind::Format, where + ": missing column '" + name + "'");
      return fields[i];
    };
    LikertResponse r;
    r.student_id = get("student_id");
    if (r.student_id.empty()) throw Error(ErrorKind::Format, where + ": empty student_id");
    try {
      r.group = parse_strategy(get("group"));
      r.value = parse_likert_value(get("value"));
    } catch (const Error& e) {
      throw Error(ErrorKind::Format, where + ": " + e.what());
    }
    r.question_id = get("question_id");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LikertResponse> load_survey_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "survey file not found: " + path.string());
  return parse_survey_csv(in, path.string());
}

StudyTables build_study_tables(std::span<const Attempt> attempts,
                               std::span<const LikertResponse> survey,
                               const StudyTablesConfig& config) {
  StudyTables t;
  const EffortReport effort = screen_effort(attempts, config.min_chars);
  t.exclusions_csv = "student_id,reason\n";
  for (const auto& e : effort.excluded)
    t.exclusions_csv += fmt::format("{},{}\n", e.student_id, to_string(e.reason));
  std::set<std::string, std::less<>> excluded;
  for (const auto& e : effort.excluded) excluded.insert(e.student_id);

  std::vector<Attempt> kept;
  for (const auto& a : attempts)
    if (!excluded.count(a.student_id)) kept.push_back(a);
  const auto summaries = initial_best(kept);

  std::vector<std::string> problems;
  for (const auto& s : summaries) problems.push_back(s.problem_id);
  std::sort(problems.begin(), problems.end());
  problems.erase(std::unique(problems.begin(), problems.end()), problems.end());

  t.scores_csv =
      "problem,score,selfeval_n,selfeval_mean,selfeval_sd,random_n,random_mean,random_sd,"
      "first_n,first_mean,first_sd,H,p,degenerate\n";
  t.posthoc_csv = "problem,score,group_a,group_b,U,z,p,p_bonferroni\n";
  for (const auto& problem : problems) {
    for (const char* measure : {"initial", "best"}) {
      std::vector<std::vector<double>> groups(3);
      for (const auto& s : summaries)
        if (s.problem_id == problem)
          groups[group_slot(s.group)].push_back(measure[0] == 'i' ? s.initial : s.best);
      std::string row = fmt::format("{},{}", problem, measure);
      for (const auto& g : groups) {
        const Summary sm = summarize(g);
        row += fmt::format(",{},{},{}", sm.n, num(sm.mean), num(sm.sd));
      }
      const bool all_present = std::all_of(groups.begin(), groups.end(),
                                           [](const auto& g) { return !g.empty(); });
      std::size_t total = 0;
      for (const auto& g : groups) total += g.size();
      if (!all_present || total < 3) {
        t.notes.push_back(fmt::format("Kruskal-Wallis skipped for {} {} scores: a group is empty",
                                      problem, measure));
        t.scores_csv += row + ",,,\n";
        continue;
      }
      const auto kw = kruskal_wallis(groups);
      t.scores_csv += row + fmt::format(",{},{},{}\n", num(kw.h), num(kw.p), kw.degenerate ? 1 : 0);
      for (const auto& c : posthoc_mann_whitney(groups))
        t.posthoc_csv += fmt::format("{},{},{},{},{},{},{},{}\n", problem, measure,
                                     to_string(kTableGroups[c.group_a]),
                                     to_string(kTableGroups[c.group_b]), num(c.test.u),
                                     num(c.test.z), num(c.test.p), num(c.p_adjusted));
    }
  }

  t.regression_csv = "coefficient,value,std_err,t,p\n";
  try {
    const auto obs = improvement_observations(summaries);
    const auto model = fit_improvement_model(obs);
    const auto& f = model.fit;
    for (std::size_t i = 0; i < f.names.size(); ++i)
      t.regression_csv += fmt::format("{},{},{},{},{}\n", f.names[i], num(f.coefficients[i]),
                                      num(f.std_errors[i]), num(f.t[i]), num(f.p[i]));
    t.regression_csv += fmt::format("R2,{},,,\nn,{},,,\n", num(f.r_squared), f.n);
  } catch (const Error& e) {
    t.notes.push_back(std::string("regression skipped: ") + e.what());
  }

  std::vector<LikertResponse> responses;
  for (const auto& r : survey)
    if (!excluded.count(r.student_id)) responses.push_back(r);
  const auto coded = code_likert(responses, config.negatively_worded);
  // values[student][question]
  std::map<std::string, std::map<std::string, double>> values;
  std::map<std::string, Strategy> group_of;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    values[responses[i].student_id][responses[i].question_id] = coded[i];
    group_of[responses[i].student_id] = responses[i].group;
  }
  auto item_values = [&](Strategy g, const std::string& q) {
    std::vector<double> v;
    for (const auto& [student, answers] : values) {
      if (group_of[student] != g) continue;
      if (auto it = answers.find(q); it != answers.end()) v.push_back(it->second);
    }
    return v;
  };

  const std::string test_name = config.paired_survey_tests ? "paired" : "welch";
  t.survey_pairs_csv =
      "group,human_item,autograder_item,human_n,human_mean,autograder_n,autograder_mean,test,t,"
      "df,p\n";
  const std::pair<const char*, const char*> pairs[] = {{"S01", "S08"}, {"S02", "S09"},
                                                       {"S03", "S10"}};
  if (!values.empty()) {
    for (Strategy g : kTableGroups) {
      for (const auto& [hq, aq] : pairs) {
        const auto h = item_values(g, hq);
        const auto a = item_values(g, aq);
        if (h.empty() && a.empty()) continue;
        const Summary hs = summarize(h);
        const Summary as = summarize(a);
        std::string row = fmt::format("{},{},{},{},{},{},{}", to_string(g), hq, aq, hs.n,
                                      num(hs.mean), as.n, num(as.mean));
        if (a.empty()) {
          t.survey_pairs_csv += row + ",,,,\n";
          continue;
        }
        try {
          TTestResult r;
          if (config.paired_survey_tests) {
            std::vector<double> ph;
            std::vector<double> pa;
            for (const auto& [student, answers] : values) {
              if (group_of[student] != g) continue;
              auto ih = answers.find(hq);
              auto ia = answers.find(aq);
              if (ih == answers.end() || ia == answers.end()) continue;
              ph.push_back(ih->second);
              pa.push_back(ia->second);
            }
            r = paired_t(ph, pa);
          } else {
            r = welch_t(h, a);
          }
          t.survey_pairs_csv +=
              row + fmt::format(",{},{},{},{}\n", test_name, num(r.t), num(r.df), num(r.p));
        } catch (const Error& e) {
          t.notes.push_back(fmt::format("{} {} vs {} test skipped: {}", to_string(g), hq, aq,
                                        e.what()));
          t.survey_pairs_csv += row + fmt::format(",{},,,\n", test_name);
        }
      }
    }

    t.survey_anova_csv = "question,selfeval_mean,random_mean,first_mean,F,p\n";
    for (const char* q : {"S04", "S05", "S06", "S07"}) {
      std::vector<std::vector<double>> groups;
      std::string row = q;
      for (Strategy g : kTableGroups) {
        groups.push_back(item_values(g, q));
        row += "," + num(summarize(groups.back()).mean);
      }
      try {
        const auto r = anova_oneway(groups);
        t.survey_anova_csv += row + fmt::format(",{},{}\n", num(r.f), num(r.p));
      } catch (const Error& e) {
        t.notes.push_back(fmt::format("ANOVA for {} skipped: {}", q, e.what()));
        t.survey_anova_csv += row + ",,\n";
      }
    }

    t.reliability_csv = "subsection,items,n,alpha\n";
    const std::pair<const char*, std::vector<std::string>> sections[] = {
        {"S01-S03", {"S01", "S02", "S03"}},
        {"S04-S07", {"S04", "S05", "S06", "S07"}},
        {"S08-S10", {"S08", "S09", "S10"}}};
    for (const auto& [label, items] : sections) {
      std::vector<std::vector<double>> matrix;
      for (const auto& [student, answers] : values) {
        std::vector<double> row;
        for (const auto& q : items) {
          auto it = answers.find(q);
          if (it == answers.end()) break;
          row.push_back(it->second);
        }
        if (row.size() == items.size()) matrix.push_back(std::move(row));
      }
      try {
        const double alpha = cronbach_alpha(matrix);
        t.reliability_csv += fmt::format("{},{},{},{}\n", label, items.size(), matrix.size(),
                                         num(alpha));
      } catch (const Error& e) {
        t.notes.push_back(fmt::format("Cronbach's alpha for {} skipped: {}", label, e.what()));
        t.reliability_csv += fmt::format("{},{},{},\n", label, items.size(), matrix.size());
      }
    }
  } else {
    t.survey_anova_csv = "question,selfeval_mean,random_mean,first_mean,F,p\n";
    t.reliability_csv = "subsection,items,n,alpha\n";
    t.notes.push_back("no survey responses supplied");
  }
  return t;
}

}  // namespace proofgrade
