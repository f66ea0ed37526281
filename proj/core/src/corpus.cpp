#include "proofgrade/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/prng.hpp"

namespace proofgrade {
namespace {

using nlohmann::json;

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

const json& require_field(const json& obj, const char* field,
                          std::string_view source, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end())
    throw Error(ErrorKind::Format, where(source, line) +
                                       ": missing field '" + field + "'");
  return *it;
}

std::string require_string(const json& obj, const char* field,
                           std::string_view source, std::size_t line) {
  const json& v = require_field(obj, field, source, line);
  if (!v.is_string())
    throw Error(ErrorKind::Format, where(source, line) + ": field '" + field +
                                       "' must be a string");
  return v.get<std::string>();
}

template <typename Fn>
void for_each_json_line(std::istream& in, std::string_view source, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Format,
                  where(source, line_no) + ": malformed record: " + e.what());
    }
    if (!obj.is_object())
      throw Error(ErrorKind::Format,
                  where(source, line_no) + ": record must be a JSON object");
    fn(obj, line_no);
  }
}

}  // namespace

std::string rubric_label(std::size_t index) {
  return "R" + std::to_string(index + 1);
}

std::size_t parse_rubric_label(std::string_view label) {
  if (label.size() == 2 && (label[0] == 'R' || label[0] == 'r') &&
      label[1] >= '1' && label[1] <= '7')
    return static_cast<std::size_t>(label[1] - '1');
  throw Error(ErrorKind::Input,
              "unknown rubric label '" + std::string(label) + "'");
}

RubricVector RubricVector::from_bits(std::span<const int> values) {
  if (values.size() != kRubricCount)
    throw Error(ErrorKind::Input, "rubric vector must have exactly 7 entries, got " +
                                      std::to_string(values.size()));
  RubricVector out;
  for (std::size_t i = 0; i < kRubricCount; ++i) {
    if (values[i] != 0 && values[i] != 1)
      throw Error(ErrorKind::Input, "rubric bit " + rubric_label(i) +
                                        " must be 0 or 1, got " +
                                        std::to_string(values[i]));
    out.bits[i] = static_cast<std::uint8_t>(values[i]);
  }
  return out;
}

int RubricVector::passed() const noexcept {
  int k = 0;
  for (auto b : bits) k += b;
  return k;
}

std::string RubricVector::to_string() const {
  std::string s;
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

const std::array<std::string, kRubricCount>& default_rubric_descriptions() {
  static const std::array<std::string, kRubricCount> kDescriptions = {
      "Identifying the base case(s)",
      "Proving the base case(s)",
      "Stating the inductive hypothesis",
      "Setting the bound of the inductive hypothesis",
      "Stating the goal of the inductive step",
      "Breaking down the inductive step",
      "Applying the inductive hypothesis",
  };
  return kDescriptions;
}

RubricVector collapse_labels(std::span<const int> raw) {
  if (raw.size() != kRubricCount)
    throw Error(ErrorKind::Input, "label vector must have exactly 7 entries, got " +
                                      std::to_string(raw.size()));
  RubricVector out;
  for (std::size_t i = 0; i < kRubricCount; ++i) {
    if (raw[i] < 0 || raw[i] > 2)
      throw Error(ErrorKind::Input, "label " + rubric_label(i) +
                                        " must be in {0,1,2}, got " +
                                        std::to_string(raw[i]));
    out.bits[i] = raw[i] == 2 ? 1 : 0;
  }
  return out;
}

RubricVector collapse_labels(const RawLabels& raw) {
  return collapse_labels(std::span<const int>(raw));
}

std::vector<ProofRecord> parse_corpus(std::istream& in,
                                      std::string_view source_name) {
  std::vector<ProofRecord> records;
  for_each_json_line(in, source_name, [&](const json& obj, std::size_t line) {
    ProofRecord rec;
    rec.proof_id = require_string(obj, "proof_id", source_name, line);
    rec.problem_id = require_string(obj, "problem_id", source_name, line);
    if (rec.problem_id.empty())
      throw Error(ErrorKind::Format,
                  where(source_name, line) + ": field 'problem_id' is empty");
    if (auto it = obj.find("author_ref"); it != obj.end() && !it->is_null()) {
      if (!it->is_string())
        throw Error(ErrorKind::Format, where(source_name, line) +
                                           ": field 'author_ref' must be a string");
      rec.author_ref = it->get<std::string>();
    }
    rec.body_markdown = require_string(obj, "body_markdown", source_name, line);

    const json& labels = require_field(obj, "raw_labels", source_name, line);
    if (!labels.is_array())
      throw Error(ErrorKind::Format, where(source_name, line) +
                                         ": field 'raw_labels' must be an array");
    if (labels.size() != kRubricCount)
      throw Error(ErrorKind::Format,
                  where(source_name, line) + ": field 'raw_labels' of proof '" +
                      rec.proof_id + "' has " + std::to_string(labels.size()) +
                      " entries, expected 7");
    for (std::size_t i = 0; i < kRubricCount; ++i) {
      const json& v = labels[i];
      if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() > 2)
        throw Error(ErrorKind::Format,
                    where(source_name, line) + ": field 'raw_labels' of proof '" +
                        rec.proof_id + "' entry " + rubric_label(i) +
                        " must be an integer in {0,1,2}");
      rec.raw_labels[i] = v.get<int>();
    }
    records.push_back(std::move(rec));
  });
  return records;
}

std::vector<ProofRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::NotFound, "corpus file not found: " + path.string());
  return parse_corpus(in, path.string());
}

void write_corpus(std::ostream& out, std::span<const ProofRecord> records) {
  for (const auto& rec : records) {
    json obj = {
        {"proof_id", rec.proof_id},
        {"problem_id", rec.problem_id},
        {"author_ref", rec.author_ref},
        {"body_markdown", rec.body_markdown},
        {"raw_labels", rec.raw_labels},
    };
    out << obj.dump() << '\n';
  }
}

std::vector<Problem> parse_problems(std::istream& in,
                                    std::string_view source_name) {
  std::vector<Problem> problems;
  for_each_json_line(in, source_name, [&](const json& obj, std::size_t line) {
    Problem p;
    p.problem_id = require_string(obj, "problem_id", source_name, line);
    p.statement_markdown =
        require_string(obj, "statement_markdown", source_name, line);
    p.rubric_descriptions = default_rubric_descriptions();
    if (auto it = obj.find("rubric_descriptions"); it != obj.end()) {
      if (!it->is_array() || it->size() != kRubricCount)
        throw Error(ErrorKind::Format,
                    where(source_name, line) +
                        ": field 'rubric_descriptions' must list 7 strings");
      for (std::size_t i = 0; i < kRubricCount; ++i) {
        if (!(*it)[i].is_string())
          throw Error(ErrorKind::Format,
                      where(source_name, line) +
                          ": field 'rubric_descriptions' must list 7 strings");
        p.rubric_descriptions[i] = (*it)[i].get<std::string>();
      }
    }
    problems.push_back(std::move(p));
  });
  return problems;
}

std::vector<Problem> load_problems(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::NotFound, "problems file not found: " + path.string());
  return parse_problems(in, path.string());
}

bool is_blank(std::string_view text) noexcept {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  });
}

std::vector<ProofRecord> filter_nonempty(std::vector<ProofRecord> records) {
  std::erase_if(records,
                [](const ProofRecord& r) { return is_blank(r.body_markdown); });
  return records;
}

std::vector<ProofRecord> filter_problem(std::span<const ProofRecord> records,
                                        std::string_view problem_id) {
  std::vector<ProofRecord> out;
  for (const auto& r : records)
    if (r.problem_id == problem_id) out.push_back(r);
  return out;
}

DatasetSplit split_dataset(std::span<const ProofRecord> records,
                           std::uint64_t seed, SplitFractions fractions) {
  if (records.empty())
    throw Error(ErrorKind::Input, "split_dataset: empty record list");
  if (fractions.train < 0 || fractions.test < 0 || fractions.validation < 0 ||
      std::abs(fractions.train + fractions.test + fractions.validation - 1.0) >
          1e-9)
    throw Error(ErrorKind::Input,
                "split_dataset: fractions must be nonnegative and sum to 1");

  std::vector<std::string> ids;
  ids.reserve(records.size());
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.proof_id).second)
      throw Error(ErrorKind::Input,
                  "split_dataset: duplicate proof_id '" + r.proof_id + "'");
    ids.push_back(r.proof_id);
  }

  PortableRng rng(seed);
  shuffle(std::span<std::string>(ids), rng);

  const double n = static_cast<double>(ids.size());
  // The epsilon keeps products such as 0.15 * 100 from flooring to 14.
  const auto n_test = static_cast<std::size_t>(std::floor(n * fractions.test + 1e-9));
  const auto n_val =
      static_cast<std::size_t>(std::floor(n * fractions.validation + 1e-9));
  const std::size_t n_train = ids.size() - n_test - n_val;

  DatasetSplit split;
  split.seed = seed;
  split.fractions = fractions;
  auto first = ids.begin();
  split.train_ids.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  first += static_cast<std::ptrdiff_t>(n_train);
  split.test_ids.assign(first, first + static_cast<std::ptrdiff_t>(n_test));
  first += static_cast<std::ptrdiff_t>(n_test);
  split.validation_ids.assign(first, ids.end());
  return split;
}

std::vector<ProofRecord> select_records(std::span<const ProofRecord> records,
                                        std::span<const std::string> ids) {
  std::unordered_map<std::string_view, const ProofRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.proof_id, &r);
  std::vector<ProofRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw Error(ErrorKind::Input, "unknown proof_id '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace proofgrade
