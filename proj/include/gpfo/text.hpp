#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gpfo::text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string to_upper_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  }
  return true;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && starts_with_ci(a, b);
}

inline std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto pos = s.find('\n', start);
    if (pos == std::string_view::npos) {
      lines.push_back(s.substr(start));
      break;
    }
    auto line = s.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = pos + 1;
  }
  return lines;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : trim_view(s)) {
    if (is_space(c)) {
      pending = true;
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

/// Display form of a concept label: markdown bold markers removed, whitespace
/// trimmed and collapsed, casing preserved.
inline std::string display_label(std::string_view raw) {
  std::string s(raw);
  replace_all(s, "**", "");
  replace_all(s, "__", "");
  auto out = collapse_whitespace(s);
  // stray emphasis or quote wrappers left around a whole label
  while (out.size() >= 2 && ((out.front() == '*' && out.back() == '*') ||
                             (out.front() == '`' && out.back() == '`'))) {
    out = collapse_whitespace(std::string_view(out).substr(1, out.size() - 2));
  }
  return out;
}

/// Identity key of a concept label. Two labels denote one node iff their keys
/// are equal.
inline std::string label_key(std::string_view raw) { return to_lower_ascii(display_label(raw)); }

/// Relation labels are uppercased; runs of spaces, underscores and hyphens
/// become a single hyphen ("relates to" -> "RELATES-TO").
inline std::string canonical_relation(std::string_view raw) {
  std::string out;
  bool pending = false;
  for (char c : trim_view(raw)) {
    if (is_space(c) || c == '_' || c == '-') {
      pending = true;
      continue;
    }
    if (pending && !out.empty()) out += '-';
    pending = false;
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

/// Case-insensitive substring search on ASCII-folded strings.
inline bool contains_ci(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  return to_lower_ascii(haystack).find(to_lower_ascii(needle)) != std::string::npos;
}

// Greek letters -------------------------------------------------------------

namespace detail {

struct GreekName {
  std::string_view latex;
  std::string_view glyph;
};

inline constexpr std::array<GreekName, 48> kGreek{{
    {"alpha", "α"},   {"beta", "β"},       {"gamma", "γ"},     {"delta", "δ"},
    {"epsilon", "ε"}, {"varepsilon", "ε"}, {"zeta", "ζ"},      {"eta", "η"},
    {"theta", "θ"},   {"vartheta", "θ"},   {"iota", "ι"},      {"kappa", "κ"},
    {"lambda", "λ"},  {"mu", "μ"},         {"nu", "ν"},        {"xi", "ξ"},
    {"omicron", "ο"}, {"pi", "π"},         {"varpi", "π"},     {"rho", "ρ"},
    {"varrho", "ρ"},  {"sigma", "σ"},      {"varsigma", "σ"},  {"tau", "τ"},
    {"upsilon", "υ"}, {"phi", "φ"},        {"varphi", "φ"},    {"chi", "χ"},
    {"psi", "ψ"},     {"omega", "ω"},      {"Gamma", "Γ"},     {"Delta", "Δ"},
    {"Theta", "Θ"},   {"Lambda", "Λ"},     {"Xi", "Ξ"},        {"Pi", "Π"},
    {"Sigma", "Σ"},   {"Upsilon", "Υ"},    {"Phi", "Φ"},       {"Psi", "Ψ"},
    {"Omega", "Ω"},   {"Alpha", "Α"},      {"Beta", "Β"},      {"Epsilon", "Ε"},
    {"Zeta", "Ζ"},    {"Eta", "Η"},        {"Kappa", "Κ"},     {"Mu", "Μ"},
}};

// Glyph variants folded onto one canonical code point.
inline constexpr std::array<std::pair<std::string_view, std::string_view>, 6> kGlyphVariants{{
    {"ϵ", "ε"}, {"ϑ", "θ"}, {"ϕ", "φ"}, {"ϖ", "π"}, {"ϱ", "ρ"}, {"ς", "σ"},
}};

inline std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
  auto c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    ++i;
    return c;
  }
  std::size_t extra = (c >= 0xF0) ? 3 : (c >= 0xE0) ? 2 : (c >= 0xC0) ? 1 : 0;
  if (extra == 0 || i + extra >= s.size()) {
    ++i;
    return 0xFFFD;
  }
  std::uint32_t cp = extra == 3 ? (c & 0x07u) : extra == 2 ? (c & 0x0Fu) : (c & 0x1Fu);
  for (std::size_t k = 1; k <= extra; ++k) {
    auto cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (cc & 0x3Fu);
  }
  i += extra + 1;
  return cp;
}

}  // namespace detail

/// True if the code point lies in the Greek and Coptic block (U+0370..U+03FF).
inline bool is_greek_code_point(std::uint32_t cp) { return cp >= 0x0370 && cp <= 0x03FF; }

/// Maps a LaTeX command name ("alpha", "varepsilon") to its canonical glyph,
/// or returns an empty view.
inline std::string_view greek_from_latex(std::string_view name) {
  for (const auto& g : detail::kGreek)
    if (g.latex == name) return g.glyph;
  return {};
}

/// Folds glyph variants (ϵ -> ε) in a UTF-8 string.
inline std::string canonical_greek(std::string_view s) {
  std::string out(s);
  for (const auto& [from, to] : detail::kGlyphVariants) replace_all(out, from, to);
  return out;
}

/// Returns the byte length of the UTF-8 sequence starting at s[i], clamped to
/// the remaining input.
inline std::size_t utf8_length_at(std::string_view s, std::size_t i) {
  std::size_t j = i;
  detail::decode_utf8(s, j);
  return j - i;
}

inline std::uint32_t code_point_at(std::string_view s, std::size_t i) {
  return detail::decode_utf8(s, i);
}

/// Number of code points (malformed bytes count one each).
inline std::size_t utf8_count(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++n) detail::decode_utf8(s, i);
  return n;
}

// Hashing -------------------------------------------------------------------

/// 64-bit FNV-1a. Byte-oriented, so results are identical on every platform.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t value, std::uint64_t seed) {
  char bytes[8];
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((value >> (8 * k)) & 0xFF);
  return fnv1a64(std::string_view(bytes, 8), seed);
}

}  // namespace gpfo::text
