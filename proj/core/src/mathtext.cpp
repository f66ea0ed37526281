#include "proofgrade/mathtext.hpp"

#include "proofgrade/error.hpp"

namespace proofgrade {
namespace {

constexpr std::size_t npos = std::string_view::npos;

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_alpha(char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_ident(char c) noexcept {
  return is_alpha(c) || (c >= '0' && c <= '9') || c == '_';
}

std::size_t utf8_length(unsigned char lead) noexcept {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte: treat as its own unit
}

// Returns one past the closing bracket matching text[open_pos], or npos if it
// is not closed before the end of the line. Backslash escapes are skipped.
std::size_t match_group(std::string_view text, std::size_t open_pos, char open,
                        char close) {
  int depth = 0;
  for (std::size_t i = open_pos; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') return npos;
    if (c == '\\') {
      ++i;
      continue;
    }
    if (c == open) {
      ++depth;
    } else if (c == close) {
      if (--depth == 0) return i + 1;
    }
  }
  return npos;
}

// True when the bytes just before `pos` (and within the fragment starting at
// `start`) form an identifier that begins with a letter.
bool preceded_by_identifier(std::string_view text, std::size_t start,
                            std::size_t pos) {
  if (pos == start || !is_ident(text[pos - 1])) return false;
  std::size_t i = pos;
  while (i > start && is_ident(text[i - 1])) --i;
  return is_alpha(text[i]);
}

std::size_t skip_command_name(std::string_view text, std::size_t pos) {
  // text[pos] == '\\' and text[pos + 1] is a letter
  ++pos;
  while (pos < text.size() && is_alpha(text[pos])) ++pos;
  return pos;
}

// Consumes the groups attached to a LaTeX command. Returns npos on an
// unbalanced brace.
std::size_t attach_command_groups(std::string_view text, std::size_t pos) {
  while (pos < text.size()) {
    const char c = text[pos];
    if (c == '{') {
      const std::size_t end = match_group(text, pos, '{', '}');
      if (end == npos) return npos;
      pos = end;
    } else if (c == '_' || c == '^') {
      const std::size_t next = pos + 1;
      if (next >= text.size() || is_space(text[next])) return next;
      if (text[next] == '{') {
        const std::size_t end = match_group(text, next, '{', '}');
        if (end == npos) return npos;
        pos = end;
      } else if (text[next] == '\\' && next + 1 < text.size() &&
                 is_alpha(text[next + 1])) {
        pos = skip_command_name(text, next);
      } else {
        pos = next + utf8_length(static_cast<unsigned char>(text[next]));
      }
    } else {
      break;
    }
  }
  return pos;
}

void emit(TokenSequence& out, std::string_view text, std::size_t begin,
          std::size_t end) {
  out.tokens.push_back(Token{std::string(text.substr(begin, end - begin)), begin, end});
}

}  // namespace

std::string normalize(std::string_view body) {
  std::vector<std::string> lines;
  std::string current;
  bool pending_space = false;
  auto flush_line = [&] {
    lines.push_back(std::move(current));
    current.clear();
    pending_space = false;
  };
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '\r') {
      if (i + 1 < body.size() && body[i + 1] == '\n') ++i;
      flush_line();
    } else if (c == '\n') {
      flush_line();
    } else if (c == ' ' || c == '\t') {
      pending_space = !current.empty();
    } else {
      if (pending_space) current.push_back(' ');
      pending_space = false;
      current.push_back(c);
    }
  }
  flush_line();

  std::string out;
  bool blank_run = false;
  for (const auto& line : lines) {
    if (line.empty()) {
      blank_run = !out.empty();
      continue;
    }
    if (!out.empty()) out += blank_run ? "\n\n" : "\n";
    blank_run = false;
    out += line;
  }
  return out;
}

TokenSequence merge_math_tokens(std::string_view text, const MergeRules& rules) {
  TokenSequence out;
  std::size_t pos = 0;
  const std::size_t n = text.size();
  while (pos < n) {
    while (pos < n && is_space(text[pos])) ++pos;
    if (pos >= n) break;

    const std::size_t start = pos;
    bool unbalanced = false;
    while (pos < n && !is_space(text[pos])) {
      const char c = text[pos];
      if (c == '\\' && pos + 1 < n && is_alpha(text[pos + 1])) {
        pos = skip_command_name(text, pos);
        if (rules.latex_commands) {
          const std::size_t end = attach_command_groups(text, pos);
          if (end == npos) {
            unbalanced = true;
            break;
          }
          pos = end;
        }
      } else if (c == '(' && rules.function_calls &&
                 preceded_by_identifier(text, start, pos)) {
        const std::size_t end = match_group(text, pos, '(', ')');
        if (end == npos) {
          unbalanced = true;
          break;
        }
        pos = end;
      } else {
        pos += utf8_length(static_cast<unsigned char>(c));
        if (pos > n) pos = n;
      }
    }

    if (!unbalanced) {
      emit(out, text, start, pos);
      continue;
    }
    // Character-level fallback over the plain whitespace-delimited fragment.
    std::size_t end = start;
    while (end < n && !is_space(text[end])) ++end;
    for (std::size_t i = start; i < end;) {
      std::size_t len = utf8_length(static_cast<unsigned char>(text[i]));
      if (i + len > end) len = end - i;
      emit(out, text, i, i + len);
      i += len;
    }
    pos = end;
  }
  return out;
}

TokenBudget check_token_budget(const TokenSequence& tokens, std::size_t limit) {
  if (limit == 0)
    throw Error(ErrorKind::Input, "token budget limit must be positive");
  return TokenBudget{tokens.size() <= limit, tokens.size()};
}

std::string compact_token(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (char c : token)
    if (!is_space(c)) out.push_back(c);
  return out;
}

std::string merged_text(const TokenSequence& tokens) {
  std::string out;
  for (const auto& t : tokens.tokens) {
    if (!out.empty()) out.push_back(' ');
    out += compact_token(t.text);
  }
  return out;
}

}  // namespace proofgrade
