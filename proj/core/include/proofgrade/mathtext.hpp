#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace proofgrade {

inline constexpr std::size_t kDefaultTokenBudget = 512;

/// A token and the byte range [begin, end) it covers in the normalised text.
/// Merged math tokens may contain interior whitespace; `text` is always the
/// exact source slice.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct TokenSequence {
  std::vector<Token> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
};

/// Which constructs are glued into a single token. Both are on by default.
struct MergeRules {
  /// \command followed by attached {..}, _x, ^x, _{..}, ^{..} groups,
  /// e.g. \sum_{i=1}^n or \frac{a}{b}.
  bool latex_commands = true;
  /// identifier directly followed by a balanced (...) argument list, e.g.
  /// g(n-1).
  bool function_calls = true;
};

/// Unifies line endings to \n, collapses runs of spaces/tabs to one space,
/// trims each line, and keeps paragraph breaks as a single blank line.
/// Leading and trailing blank lines are dropped. Math delimiters are left
/// untouched.
std::string normalize(std::string_view body_markdown);

/// Whitespace tokenisation with math-aware merging (see MergeRules). Balanced
/// groups are searched within the current line only; an unbalanced group
/// makes the enclosing whitespace-delimited fragment fall back to one token
/// per UTF-8 code point.
TokenSequence merge_math_tokens(std::string_view normalized_text,
                                const MergeRules& rules = {});

struct TokenBudget {
  bool fits = true;
  std::size_t token_count = 0;
};

/// fits == (token_count <= limit). `limit` must be positive.
TokenBudget check_token_budget(const TokenSequence& tokens,
                               std::size_t limit = kDefaultTokenBudget);

/// Token text with all whitespace removed, e.g. "g(n - 1)" -> "g(n-1)".
std::string compact_token(std::string_view token);

/// Compact tokens joined by single spaces: the text handed to providers that
/// need merged math, so a downstream whitespace tokenizer sees each merged
/// expression as one unit.
std::string merged_text(const TokenSequence& tokens);

}  // namespace proofgrade
