#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace proofgrade {

inline constexpr std::size_t kRubricCount = 7;

/// "R1" .. "R7" for indices 0..6.
std::string rubric_label(std::size_t index);

/// Parses "R1".."R7" back to 0..6; throws on anything else.
std::size_t parse_rubric_label(std::string_view label);

/// Grades as originally assigned: 0 absent, 1 partial, 2 fully correct.
using RawLabels = std::array<int, kRubricCount>;

/// Binary verdict per rubric point, index i <-> R(i+1). 1 means correct.
struct RubricVector {
  std::array<std::uint8_t, kRubricCount> bits{};

  /// Validates length 7 and entries in {0,1}.
  static RubricVector from_bits(std::span<const int> values);

  std::uint8_t operator[](std::size_t i) const { return bits[i]; }
  std::uint8_t& operator[](std::size_t i) { return bits[i]; }

  /// Number of rubric points marked correct.
  int passed() const noexcept;

  /// Compact "1001111" rendering.
  std::string to_string() const;

  friend bool operator==(const RubricVector&, const RubricVector&) = default;
};

struct ProofRecord {
  std::string proof_id;
  std::string problem_id;
  std::string author_ref;
  std::string body_markdown;
  RawLabels raw_labels{};
};

/// Problem statement plus the descriptions of its seven rubric points.
struct Problem {
  std::string problem_id;
  std::string statement_markdown;
  std::array<std::string, kRubricCount> rubric_descriptions;
};

/// The R1..R7 descriptions used when a problems file does not override them.
const std::array<std::string, kRubricCount>& default_rubric_descriptions();

/// Maps 0 and 1 to 0 (incorrect), 2 to 1 (correct).
RubricVector collapse_labels(const RawLabels& raw);
RubricVector collapse_labels(std::span<const int> raw);

/// Reads a line-delimited JSON corpus. Blank lines are skipped; every other
/// line must be one record. Errors name the source, the line and the field.
std::vector<ProofRecord> parse_corpus(std::istream& in,
                                      std::string_view source_name);
std::vector<ProofRecord> load_corpus(const std::filesystem::path& path);

/// Serialises records in the same line-delimited format `load_corpus` reads.
void write_corpus(std::ostream& out, std::span<const ProofRecord> records);

/// Problems file: one JSON object per line with problem_id,
/// statement_markdown and an optional 7-entry rubric_descriptions array.
std::vector<Problem> parse_problems(std::istream& in,
                                    std::string_view source_name);
std::vector<Problem> load_problems(const std::filesystem::path& path);

/// True when `text` contains nothing but whitespace.
bool is_blank(std::string_view text) noexcept;

/// Drops records whose body is empty or whitespace-only; keeps order.
std::vector<ProofRecord> filter_nonempty(std::vector<ProofRecord> records);

/// Records whose problem_id equals `problem_id`, in order.
std::vector<ProofRecord> filter_problem(std::span<const ProofRecord> records,
                                        std::string_view problem_id);

struct SplitFractions {
  double train = 0.70;
  double test = 0.15;
  double validation = 0.15;
};

struct DatasetSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::vector<std::string> validation_ids;
  std::uint64_t seed = 0;
  SplitFractions fractions;
};

/// Shuffles record ids with PortableRng(seed), then assigns contiguous
/// blocks: train first, then test, then validation. Test and validation
/// sizes are floor(n * fraction); train receives the remainder.
DatasetSplit split_dataset(std::span<const ProofRecord> records,
                           std::uint64_t seed, SplitFractions fractions = {});

/// Records whose ids are listed in `ids`, in the order of `ids`.
std::vector<ProofRecord> select_records(std::span<const ProofRecord> records,
                                        std::span<const std::string> ids);

}  // namespace proofgrade
