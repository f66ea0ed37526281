#include "proofgrade/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string_view>

#include "proofgrade/embeddings.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/prng.hpp"

namespace proofgrade {
namespace {

constexpr std::array<std::string_view, 48> kFiller = {
    "we",          "show",        "that",        "the",         "claim",
    "holds",       "for",         "all",         "integers",    "let",
    "assume",      "then",        "hence",       "therefore",   "since",
    "by",          "definition",  "it",          "follows",     "clearly",
    "now",         "consider",    "case",        "step",        "so",
    "which",       "gives",       "as",          "required",    "thus",
    "$n \\geq 1$", "$k + 1$",     "$2^{k}$",     "f(k+1)",      "$n^2$",
    "\\sum_{i=1}^{k} i", "\\frac{k}{2}", "$3 \\mid n$", "$a_{n}$",  "g(n)",
    "$x_{k+1}$",   "$= 2k + 2$",  "$\\leq$",     "$k!$",        "equation",
    "both",        "sides",       "again"};

constexpr std::array<std::string_view, kRubricCount> kRubricStems = {
    "basecases", "baseproof", "hypstatement", "hypothesis",
    "stepgoal",  "stepsplit", "hypapplied"};

}  // namespace

std::array<std::array<std::string, 2>, kRubricCount> synthetic_markers(
    const SyntheticCorpusSpec& spec) {
  std::array<std::array<std::string, 2>, kRubricCount> out;
  if (spec.hash_dim == 0) {
    for (std::size_t i = 0; i < kRubricCount; ++i) {
      out[i][0] = fmt::format("{}absent", kRubricStems[i]);
      out[i][1] = fmt::format("{}present", kRubricStems[i]);
    }
    return out;
  }
  // Bucket index and sign of a single-token word; sign 0 if it spans buckets.
  auto slot = [&](std::string_view text) {
    const auto v = hash_embed(text, spec.hash_dim, spec.hash_seed);
    std::pair<std::size_t, int> found{0, 0};
    int hits = 0;
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      if (v.values[i] != 0.0) {
        found = {i, v.values[i] > 0.0 ? 1 : -1};
        ++hits;
      }
    }
    if (hits != 1) found.second = 0;
    return found;
  };
  std::set<std::size_t> taken;
  for (auto word : kFiller) {
    const auto v = hash_embed(word, spec.hash_dim, spec.hash_seed);
    for (std::size_t i = 0; i < v.values.size(); ++i)
      if (v.values[i] != 0.0) taken.insert(i);
  }
  constexpr int kMaxTries = 200000;
  for (std::size_t i = 0; i < kRubricCount; ++i) {
    std::string present;
    std::pair<std::size_t, int> at{0, 0};
    for (int k = 0;; ++k) {
      if (k > kMaxTries) throw Error(ErrorKind::Input, "hash dimension too small for the markers");
      present = k == 0 ? fmt::format("{}present", kRubricStems[i])
                       : fmt::format("{}present{}", kRubricStems[i], k);
      at = slot(present);
      if (at.second != 0 && !taken.count(at.first)) break;
    }
    std::string absent;
    for (int k = 0;; ++k) {
      if (k > kMaxTries) throw Error(ErrorKind::Input, "no absent marker found for the markers");
      absent = k == 0 ? fmt::format("{}absent", kRubricStems[i])
                      : fmt::format("{}absent{}", kRubricStems[i], k);
      const auto a = slot(absent);
      if (a.first == at.first && a.second == -at.second) break;
    }
    taken.insert(at.first);
    out[i] = {absent, present};
  }
  return out;
}

std::vector<ProofRecord> synthetic_corpus(const SyntheticCorpusSpec& spec) {
  if (!(spec.positive_rate >= 0.0 && spec.positive_rate <= 1.0))
    throw Error(ErrorKind::Input, "positive_rate must lie in [0, 1]");
  if (spec.marker_repeats == 0) throw Error(ErrorKind::Input, "marker_repeats must be positive");
  const auto markers = synthetic_markers(spec);
  PortableRng rng(spec.seed);
  std::vector<ProofRecord> out;
  out.reserve(spec.records);
  // Exactly round(records * positive_rate) positives per rubric point.
  const auto positives = static_cast<std::size_t>(
      std::llround(static_cast<double>(spec.records) * spec.positive_rate));
  std::array<std::vector<std::uint8_t>, kRubricCount> present;
  for (auto& column : present) {
    column.assign(spec.records, 0);
    std::fill(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(positives), 1);
    shuffle(std::span<std::uint8_t>(column), rng);
  }
  for (std::size_t r = 0; r < spec.records; ++r) {
    ProofRecord rec;
    rec.proof_id = fmt::format("{}-syn-{:05}", spec.problem_id, r);
    rec.problem_id = spec.problem_id;
    rec.author_ref = fmt::format("author-{:04}", rng.bounded(400));

    std::vector<std::string> words;
    for (std::size_t i = 0; i < kRubricCount; ++i) {
      const bool on = present[i][r] != 0;
      rec.raw_labels[i] = on ? 2 : static_cast<int>(rng.bounded(2));
      for (std::size_t k = 0; k < spec.marker_repeats; ++k) words.push_back(markers[i][on ? 1 : 0]);
    }
    for (std::size_t k = 0; k < spec.filler_words; ++k)
      words.emplace_back(kFiller[rng.bounded(kFiller.size())]);
    shuffle(std::span<std::string>(words), rng);

    std::string body = "Proof.";
    for (std::size_t k = 0; k < words.size(); ++k) {
      body += (k > 0 && k % 12 == 0) ? "\n\n" : " ";
      body += words[k];
    }
    rec.body_markdown = std::move(body);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace proofgrade
