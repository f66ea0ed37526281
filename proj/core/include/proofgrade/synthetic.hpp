#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "proofgrade/corpus.hpp"

namespace proofgrade {

/// Labeled corpus whose rubric labels follow a planted linear rule: each
/// rubric point has one "present" and one "absent" marker word, repeated
/// `marker_repeats` times, and the label is 1 exactly when the present
/// marker occurs. Everything else in the body is label-independent filler
/// drawn from a fixed vocabulary of words and math fragments. Each rubric
/// point has exactly round(records * positive_rate) positive records.
struct SyntheticCorpusSpec {
  std::size_t records = 1000;
  std::string problem_id = "P1";
  std::uint64_t seed = 0;
  std::size_t filler_words = 20;
  std::size_t marker_repeats = 3;
  double positive_rate = 0.5;
  /// Feature-hashing layout the markers are chosen for. The two markers of
  /// a rubric point share one bucket with opposite signs, so the label is
  /// the sign of a single coordinate; buckets are distinct across rubric
  /// points and from the filler vocabulary. 0 disables the layout search.
  std::size_t hash_dim = 256;
  std::uint64_t hash_seed = 0;
};

std::vector<ProofRecord> synthetic_corpus(const SyntheticCorpusSpec& spec);

/// Marker words, [rubric][0 = absent, 1 = present], chosen for hash_dim and
/// hash_seed.
std::array<std::array<std::string, 2>, kRubricCount> synthetic_markers(
    const SyntheticCorpusSpec& spec);

}  // namespace proofgrade
