#pragma once

// Parsing and emission of structured reasoning output: the thinking region,
// knowledge-graph blocks (`**A** -[REL]-> **B**`), abstract-pattern blocks
// (α → β, α ∝ β, α ≠ β, "If ... then ..." rules), named sections and the final
// answer. Every function here is pure and total.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gpfo/text.hpp"

namespace gpfo {

inline constexpr std::string_view kThinkingOpen = "<|thinking|>";
inline constexpr std::string_view kThinkingClose = "<|/thinking|>";
inline constexpr std::string_view kUnsectioned = "UNSECTIONED";

struct Triple {
  std::string subject;
  std::string relation;
  std::string object;
  std::string note;  // parenthetical annotation stripped from a term, if any

  friend bool operator==(const Triple&, const Triple&) = default;
};

enum class RelationKind { Arrow, Proportional, NotEqual };

inline std::string_view to_string(RelationKind k) {
  switch (k) {
    case RelationKind::Arrow: return "ARROW";
    case RelationKind::Proportional: return "PROPORTIONAL";
    case RelationKind::NotEqual: return "NOT-EQUAL";
  }
  return "ARROW";
}

inline std::string_view operator_glyph(RelationKind k) {
  switch (k) {
    case RelationKind::Arrow: return "→";
    case RelationKind::Proportional: return "∝";
    case RelationKind::NotEqual: return "≠";
  }
  return "→";
}

struct PatternState {
  std::string symbol;
  std::string binding;         // concept the symbol denotes, empty if never explained
  bool auto_declared = false;  // referenced but never bound by an explanation line

  friend bool operator==(const PatternState& a, const PatternState& b) {
    return a.symbol == b.symbol && a.binding == b.binding;
  }
};

struct PatternRelation {
  RelationKind kind = RelationKind::Arrow;
  std::vector<std::string> lhs;
  std::vector<std::string> rhs;
  std::vector<PatternRelation> conditional;  // antecedents of an "If ... then ..." rule

  friend bool operator==(const PatternRelation&, const PatternRelation&) = default;
};

struct AbstractPattern {
  std::vector<PatternState> states;
  std::vector<PatternRelation> relations;
  std::string context;

  const PatternState* find_state(std::string_view symbol) const {
    for (const auto& s : states)
      if (s.symbol == symbol) return &s;
    return nullptr;
  }

  PatternState& declare(std::string_view symbol) {
    for (auto& s : states)
      if (s.symbol == symbol) return s;
    states.push_back(PatternState{std::string(symbol), {}, true});
    return states.back();
  }

  bool empty() const { return states.empty() && relations.empty() && context.empty(); }

  friend bool operator==(const AbstractPattern&, const AbstractPattern&) = default;
};

struct Section {
  std::string heading;
  std::string body;

  friend bool operator==(const Section&, const Section&) = default;
};

/// A line the grammar did not accept. Never fatal.
struct Diagnostic {
  std::size_t line = 0;  // 1-based, relative to the block being parsed
  std::string text;
  std::string reason;
};

struct ReasoningTrace {
  bool thinking_present = false;
  bool malformed_delimiters = false;
  std::string thinking;  // raw text of the first thinking region
  std::vector<Section> sections;
  std::vector<Triple> graph_block;
  std::optional<AbstractPattern> pattern;
  std::string final_answer;
  std::vector<std::string> warnings;
  std::vector<Diagnostic> diagnostics;
};

/// Heading aliases used to classify sections. Matching is case-insensitive on
/// the heading title with any trailing colon removed.
struct FormatOptions {
  std::vector<std::string> graph_headings{"Knowledge Graph", "Core Concepts and Relationships",
                                          "Knowledge Graphs", "Graph"};
  std::vector<std::string> pattern_headings{"Abstract Pattern", "Abstract Patterns"};
  // Sub-headings that stay inside an abstract-pattern section.
  std::vector<std::string> pattern_subheadings{
      "Key Transformation Rule", "Key Transformation Rules", "Essential Condition",
      "Essential Conditions",    "Explanation",              "Pattern Context"};
};

inline const FormatOptions& default_format_options() {
  static const FormatOptions opts;
  return opts;
}

namespace detail {

inline bool matches_alias(std::string_view title, const std::vector<std::string>& aliases) {
  return std::any_of(aliases.begin(), aliases.end(),
                     [&](const std::string& a) { return text::iequals(title, a); });
}

inline std::string strip_heading_title(std::string_view t) {
  auto s = text::trim(t);
  while (!s.empty() && (s.back() == ':' || text::is_space(s.back()))) s.pop_back();
  return text::collapse_whitespace(s);
}

/// Recognizes `**Title:**`, `**Title**:` and markdown `# Title` lines that carry
/// nothing else.
inline std::optional<std::string> heading_title(std::string_view line) {
  auto t = text::trim_view(line);
  if (t.empty()) return std::nullopt;
  if (t.front() == '#') {
    std::size_t hashes = 0;
    while (hashes < t.size() && t[hashes] == '#') ++hashes;
    if (hashes > 6 || hashes >= t.size() || !text::is_space(t[hashes])) return std::nullopt;
    auto title = strip_heading_title(text::display_label(t.substr(hashes)));
    if (title.empty()) return std::nullopt;
    return title;
  }
  if (t.size() < 5 || t.substr(0, 2) != "**") return std::nullopt;
  auto tail = t.substr(t.size() - 3);
  if (tail != "**:" && tail != ":**") return std::nullopt;
  auto inner = text::trim_view(t.substr(2, t.size() - 5));
  if (inner.empty() || inner.find("**") != std::string_view::npos) return std::nullopt;
  auto title = strip_heading_title(inner);
  if (title.empty()) return std::nullopt;
  return title;
}

/// Drops a leading list marker ("1.", "2)", "-", "*", "+", "•").
inline std::string_view strip_enumeration(std::string_view line) {
  auto t = text::trim_view(line);
  std::size_t i = 0;
  while (i < t.size() && t[i] >= '0' && t[i] <= '9') ++i;
  if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) {
    return text::trim_view(t.substr(i + 1));
  }
  if (t.size() >= 2 && (t[0] == '-' || t[0] == '+' || t[0] == '*') && text::is_space(t[1])) {
    return text::trim_view(t.substr(2));
  }
  if (t.substr(0, 3) == "•") return text::trim_view(t.substr(3));
  return t;
}

inline std::string join_body(const std::vector<std::string_view>& lines) {
  std::size_t first = 0, last = lines.size();
  while (first < last && text::trim_view(lines[first]).empty()) ++first;
  while (last > first && text::trim_view(lines[last - 1]).empty()) --last;
  std::string out;
  for (std::size_t i = first; i < last; ++i) {
    if (i > first) out += '\n';
    out += lines[i];
  }
  // trailing whitespace on the final line is not significant
  while (!out.empty() && text::is_space(out.back())) out.pop_back();
  return out;
}

// Term handling for the triple grammar -------------------------------------

struct Term {
  std::string label;
  std::string note;
};

inline Term split_term(std::string_view raw) {
  std::string s = text::trim(raw);
  // trailing list punctuation; a period only after a bold label or a note
  while (!s.empty()) {
    char c = s.back();
    bool strip = c == ',' || c == ';' ||
                 (c == '.' && s.size() >= 2 && (s[s.size() - 2] == '*' || s[s.size() - 2] == ')'));
    if (!strip) break;
    s.pop_back();
    while (!s.empty() && text::is_space(s.back())) s.pop_back();
  }
  Term term;
  auto t = text::trim(s);
  if (!t.empty() && t.back() == ')') {
    int depth = 0;
    for (std::size_t i = t.size(); i-- > 0;) {
      if (t[i] == ')') ++depth;
      if (t[i] == '(') {
        if (--depth == 0) {
          auto before = text::trim_view(std::string_view(t).substr(0, i));
          if (!before.empty()) {
            term.note = text::collapse_whitespace(std::string_view(t).substr(i + 1, t.size() - i - 2));
            t = std::string(before);
          }
          break;
        }
      }
    }
  }
  term.label = text::display_label(t);
  return term;
}

struct ArrowSplit {
  std::vector<std::string_view> terms;
  std::vector<std::string_view> relations;
};

inline ArrowSplit split_arrows(std::string_view line) {
  ArrowSplit out;
  std::size_t pos = 0, term_start = 0;
  while (pos < line.size()) {
    auto open = line.find("-[", pos);
    if (open == std::string_view::npos) break;
    auto close = line.find(']', open + 2);
    if (close == std::string_view::npos) break;
    std::size_t after = close + 1;
    std::size_t arrow_len = 0;
    if (line.substr(after, 2) == "->") arrow_len = 2;
    else if (line.substr(after, 3) == "→") arrow_len = 3;
    if (arrow_len == 0) {
      pos = open + 2;
      continue;
    }
    out.terms.push_back(line.substr(term_start, open - term_start));
    out.relations.push_back(line.substr(open + 2, close - open - 2));
    term_start = after + arrow_len;
    pos = term_start;
  }
  out.terms.push_back(line.substr(term_start));
  return out;
}

// Pattern notation ---------------------------------------------------------

/// Rewrites LaTeX and ASCII spellings of the pattern notation into glyphs and
/// removes math delimiters and bold markers.
inline std::string normalize_pattern_line(std::string_view raw, bool keep_bold = false) {
  std::string s;
  s.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    char c = raw[i];
    if (c == '\\') {
      std::size_t j = i + 1;
      while (j < raw.size() && std::isalpha(static_cast<unsigned char>(raw[j]))) ++j;
      auto name = raw.substr(i + 1, j - i - 1);
      if (name.empty()) {
        // \( \) \[ \] and escaped punctuation
        if (j < raw.size() && (raw[j] == '(' || raw[j] == ')' || raw[j] == '[' || raw[j] == ']')) {
          s += ' ';
          i = j + 1;
          continue;
        }
        s += c;
        ++i;
        continue;
      }
      if (auto g = text::greek_from_latex(name); !g.empty()) {
        s += g;
      } else if (name == "rightarrow" || name == "to" || name == "longrightarrow" ||
                 name == "Rightarrow" || name == "mapsto") {
        s += "→";
      } else if (name == "propto") {
        s += "∝";
      } else if (name == "neq" || name == "ne") {
        s += "≠";
      } else if (name == "text" || name == "mathrm" || name == "mathit" || name == "quad" ||
                 name == "left" || name == "right") {
        s += ' ';
      } else {
        s.append(raw.substr(i, j - i));
      }
      i = j;
      continue;
    }
    if (c == '$' || c == '{' || c == '}') {
      s += ' ';
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < raw.size() && raw[i + 1] == '>') {
      s += "→";
      i += 2;
      continue;
    }
    if (c == '!' && i + 1 < raw.size() && raw[i + 1] == '=') {
      s += "≠";
      i += 2;
      continue;
    }
    s += c;
    ++i;
  }
  if (!keep_bold) text::replace_all(s, "**", "");
  return text::canonical_greek(s);
}

enum class TokKind { Symbol, Op, Group, End, Bad };

struct Tok {
  TokKind kind = TokKind::End;
  std::string text;
  RelationKind op = RelationKind::Arrow;
};

/// Tokenizer over a normalized pattern expression. Symbols are one Greek
/// letter optionally followed by digits, primes or an underscore index.
class PatternLexer {
 public:
  explicit PatternLexer(std::string_view s) : s_(s) {}

  Tok next() {
    skip_space();
    if (i_ >= s_.size()) return {TokKind::End, {}, {}};
    auto cp = text::code_point_at(s_, i_);
    auto len = text::utf8_length_at(s_, i_);
    if (cp == 0x2192) return advance(len, TokKind::Op, RelationKind::Arrow);
    if (cp == 0x221D) return advance(len, TokKind::Op, RelationKind::Proportional);
    if (cp == 0x2260) return advance(len, TokKind::Op, RelationKind::NotEqual);
    if (s_[i_] == ',' || s_[i_] == '+' || s_[i_] == '&') return advance(1, TokKind::Group, {});
    if (text::is_greek_code_point(cp)) {
      std::size_t start = i_;
      i_ += len;
      while (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '\'' ||
                                s_[i_] == '_')) {
        ++i_;
      }
      std::string sym(s_.substr(start, i_ - start));
      text::replace_all(sym, "_", "");
      return {TokKind::Symbol, sym, {}};
    }
    return {TokKind::Bad, std::string(s_.substr(i_, len)), {}};
  }

 private:
  Tok advance(std::size_t len, TokKind kind, RelationKind op) {
    Tok t{kind, std::string(s_.substr(i_, len)), op};
    i_ += len;
    return t;
  }
  void skip_space() {
    while (i_ < s_.size() &&
           (text::is_space(s_[i_]) || s_[i_] == '(' || s_[i_] == ')' || s_[i_] == '`'))
      ++i_;
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

/// Parses `group (op group)+` into pairwise relations; nullopt unless the whole
/// expression is consumed.
inline std::optional<std::vector<PatternRelation>> parse_relation_chain(std::string_view expr) {
  auto trimmed = text::trim(expr);
  while (!trimmed.empty() && (trimmed.back() == '.' || trimmed.back() == ';' || trimmed.back() == ':'))
    trimmed.pop_back();
  PatternLexer lex(trimmed);
  std::vector<std::vector<std::string>> groups;
  std::vector<RelationKind> ops;
  std::vector<std::string> current;
  bool expect_symbol = true;
  for (;;) {
    auto t = lex.next();
    if (t.kind == TokKind::End) break;
    if (t.kind == TokKind::Bad) return std::nullopt;
    if (t.kind == TokKind::Symbol) {
      if (!expect_symbol) return std::nullopt;
      current.push_back(t.text);
      expect_symbol = false;
    } else if (t.kind == TokKind::Group) {
      if (expect_symbol) return std::nullopt;
      expect_symbol = true;
    } else {
      if (expect_symbol || current.empty()) return std::nullopt;
      groups.push_back(std::move(current));
      current.clear();
      ops.push_back(t.op);
      expect_symbol = true;
    }
  }
  if (expect_symbol || current.empty() || ops.empty()) return std::nullopt;
  groups.push_back(std::move(current));
  std::vector<PatternRelation> rels;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    rels.push_back(PatternRelation{ops[k], groups[k], groups[k + 1], {}});
  }
  return rels;
}

inline std::vector<std::string_view> split_words_ci(std::string_view s, std::string_view word) {
  // splits on whole-word, case-insensitive occurrences of `word`
  std::vector<std::string_view> parts;
  auto lower = text::to_lower_ascii(s);
  std::size_t start = 0, pos = 0;
  while ((pos = lower.find(word, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || text::is_space(lower[pos - 1]);
    bool right_ok = pos + word.size() >= lower.size() || text::is_space(lower[pos + word.size()]);
    if (left_ok && right_ok) {
      parts.push_back(s.substr(start, pos - start));
      start = pos + word.size();
    }
    pos += word.size();
  }
  parts.push_back(s.substr(start));
  return parts;
}

/// "If A and B then C" -> relation C with antecedents A, B.
inline std::optional<std::vector<PatternRelation>> parse_conditional(std::string_view line) {
  auto t = text::trim_view(line);
  if (!text::starts_with_ci(t, "if ")) return std::nullopt;
  auto body = t.substr(3);
  auto then_split = split_words_ci(body, "then");
  if (then_split.size() != 2) return std::nullopt;
  std::vector<PatternRelation> antecedents;
  auto cond_text = std::string(then_split[0]);
  text::replace_all(cond_text, "∧", " and ");
  for (auto piece : split_words_ci(cond_text, "and")) {
    auto trimmed = text::trim(piece);
    while (!trimmed.empty() && trimmed.back() == ',') trimmed.pop_back();
    if (trimmed.empty()) continue;
    auto rels = parse_relation_chain(trimmed);
    if (!rels) return std::nullopt;
    antecedents.insert(antecedents.end(), rels->begin(), rels->end());
  }
  auto consequent = parse_relation_chain(then_split[1]);
  if (!consequent || antecedents.empty()) return std::nullopt;
  for (auto& r : *consequent) r.conditional = antecedents;
  return consequent;
}

/// Extracts "σ represents X" bindings from one explanation line.
inline std::vector<std::pair<std::string, std::string>> extract_bindings(std::string_view line) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string_view marker = "represents";
  auto lower = text::to_lower_ascii(line);
  std::size_t pos = 0;
  while ((pos = lower.find(marker, pos)) != std::string::npos) {
    // symbol immediately before the marker
    std::size_t j = pos;
    while (j > 0 && (text::is_space(line[j - 1]) || line[j - 1] == ')' || line[j - 1] == '(' ||
                     line[j - 1] == '\'' || std::isdigit(static_cast<unsigned char>(line[j - 1]))))
      --j;
    std::size_t sym_end = j;
    while (j > 0 && (static_cast<unsigned char>(line[j - 1]) & 0xC0) == 0x80) --j;
    if (j > 0) --j;
    std::string symbol;
    if (j < sym_end && text::is_greek_code_point(text::code_point_at(line, j))) {
      std::size_t k = j + text::utf8_length_at(line, j);
      while (k < line.size() && (std::isdigit(static_cast<unsigned char>(line[k])) || line[k] == '\''))
        ++k;
      symbol = std::string(line.substr(j, k - j));
    }
    std::size_t after = pos + marker.size();
    pos = after;
    if (symbol.empty()) continue;
    auto rest = text::trim_view(line.substr(after));
    std::string binding;
    if (rest.substr(0, 2) == "**") {
      auto close = rest.find("**", 2);
      if (close != std::string_view::npos) binding = std::string(rest.substr(2, close - 2));
    }
    if (binding.empty()) {
      std::size_t end = rest.size();
      for (std::string_view stop : {",", ";", ".", " and ", " while ", " which "}) {
        auto p = rest.find(stop);
        if (p != std::string_view::npos) end = std::min(end, p);
      }
      binding = std::string(rest.substr(0, end));
    }
    binding = text::display_label(binding);
    if (!binding.empty()) out.emplace_back(std::move(symbol), std::move(binding));
  }
  return out;
}

inline void declare_relation_states(AbstractPattern& p, const PatternRelation& r) {
  for (const auto& a : r.conditional) declare_relation_states(p, a);
  for (const auto& s : r.lhs) p.declare(s);
  for (const auto& s : r.rhs) p.declare(s);
}

}  // namespace detail

/// Parses one knowledge-graph block. A line `term (-[REL]-> term)+` with k
/// arrows yields k consecutive triples. Lines that do not match the grammar
/// are reported in `diagnostics` and skipped.
inline std::vector<Triple> parse_graph_block(std::string_view block_text,
                                             std::vector<Diagnostic>* diagnostics = nullptr) {
  std::vector<Triple> triples;
  auto lines = text::split_lines(block_text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    auto raw = lines[n];
    if (text::trim_view(raw).empty()) continue;
    auto report = [&](std::string reason) {
      if (diagnostics) diagnostics->push_back({n + 1, std::string(raw), std::move(reason)});
    };
    auto body = detail::strip_enumeration(raw);
    auto split = detail::split_arrows(body);
    if (split.relations.empty()) {
      report("no -[REL]-> arrow");
      continue;
    }
    std::vector<detail::Term> terms;
    bool ok = true;
    for (auto t : split.terms) {
      terms.push_back(detail::split_term(t));
      if (terms.back().label.empty()) ok = false;
    }
    std::vector<std::string> rels;
    for (auto r : split.relations) {
      rels.push_back(text::canonical_relation(r));
      if (rels.back().empty()) ok = false;
    }
    if (!ok) {
      report("empty term or relation");
      continue;
    }
    std::vector<std::string> notes(rels.size());
    for (std::size_t j = 0; j < terms.size(); ++j) {
      if (terms[j].note.empty()) continue;
      auto& slot = notes[j == 0 ? 0 : j - 1];
      if (!slot.empty()) slot += "; ";
      slot += terms[j].note;
    }
    for (std::size_t k = 0; k < rels.size(); ++k) {
      triples.push_back(Triple{terms[k].label, rels[k], terms[k + 1].label, notes[k]});
    }
  }
  return triples;
}

/// Parses one abstract-pattern block: arrow chains, proportionality,
/// inequality, conditional rules, "σ represents X" bindings and the
/// "Pattern Context:" paragraph.
inline AbstractPattern parse_pattern_block(std::string_view block_text,
                                           std::vector<Diagnostic>* diagnostics = nullptr) {
  AbstractPattern pattern;
  std::vector<std::pair<std::string, std::string>> bindings;
  auto lines = text::split_lines(block_text);
  bool explanation = false;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    auto raw = lines[n];
    if (text::trim_view(raw).empty()) continue;
    auto report = [&](std::string reason) {
      if (diagnostics) diagnostics->push_back({n + 1, std::string(raw), std::move(reason)});
    };
    auto stripped = text::display_label(detail::strip_enumeration(raw));
    if (text::starts_with_ci(stripped, "Pattern Context:")) {
      std::vector<std::string_view> rest;
      auto first = text::trim_view(std::string_view(stripped).substr(16));
      std::string context(first);
      for (std::size_t k = n + 1; k < lines.size(); ++k) rest.push_back(lines[k]);
      auto tail = detail::join_body(rest);
      if (!context.empty() && !tail.empty()) context += '\n';
      context += tail;
      pattern.context = context;
      break;
    }
    auto line = detail::normalize_pattern_line(detail::strip_enumeration(raw));
    auto trimmed = text::trim(line);
    // "Label:" sub-headings, possibly followed by an expression on the same line
    std::string expr = trimmed;
    if (auto colon = trimmed.find(':'); colon != std::string::npos) {
      auto label = text::trim(std::string_view(trimmed).substr(0, colon));
      bool label_is_words = !label.empty() && std::all_of(label.begin(), label.end(), [](char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || c == ' ' || c == '-';
      });
      if (label_is_words) {
        if (text::iequals(label, "Explanation") || text::iequals(label, "Explanations")) {
          explanation = true;
        } else if (detail::matches_alias(label, default_format_options().pattern_subheadings)) {
          explanation = false;
        }
        expr = text::trim(std::string_view(trimmed).substr(colon + 1));
        if (expr.empty()) continue;
      }
    }
    auto bold_line = detail::normalize_pattern_line(detail::strip_enumeration(raw), true);
    if (explanation) {
      auto found = detail::extract_bindings(bold_line);
      bindings.insert(bindings.end(), found.begin(), found.end());
      continue;
    }
    if (auto cond = detail::parse_conditional(expr)) {
      for (auto& r : *cond) {
        detail::declare_relation_states(pattern, r);
        pattern.relations.push_back(std::move(r));
      }
      continue;
    }
    if (auto chain = detail::parse_relation_chain(expr)) {
      for (auto& r : *chain) {
        detail::declare_relation_states(pattern, r);
        pattern.relations.push_back(std::move(r));
      }
      continue;
    }
    auto found = detail::extract_bindings(bold_line);
    if (!found.empty()) {
      bindings.insert(bindings.end(), found.begin(), found.end());
      continue;
    }
    report("not a pattern expression");
  }
  for (auto& [symbol, binding] : bindings) {
    auto& state = pattern.declare(symbol);
    if (state.binding.empty()) state.binding = binding;
    state.auto_declared = false;
  }
  return pattern;
}

/// Splits a raw model response into thinking sections and final answer, and
/// parses the knowledge-graph and abstract-pattern sections it finds.
inline ReasoningTrace parse_response(std::string_view raw,
                                     const FormatOptions& opts = default_format_options()) {
  ReasoningTrace trace;
  auto open = raw.find(kThinkingOpen);
  auto close_any = raw.find(kThinkingClose);
  if (open == std::string_view::npos) {
    if (close_any != std::string_view::npos)
      trace.warnings.push_back("closing thinking marker without an opening marker");
    trace.final_answer = text::trim(raw);
    return trace;
  }
  trace.thinking_present = true;
  auto inner_start = open + kThinkingOpen.size();
  auto close = raw.find(kThinkingClose, inner_start);
  std::string_view inner;
  if (close == std::string_view::npos) {
    trace.malformed_delimiters = true;
    trace.warnings.push_back("opening thinking marker has no closing marker");
    inner = raw.substr(inner_start);
  } else {
    inner = raw.substr(inner_start, close - inner_start);
    auto answer = raw.substr(close + kThinkingClose.size());
    if (answer.find(kThinkingOpen) != std::string_view::npos)
      trace.warnings.push_back("additional thinking regions kept as final-answer text");
    trace.final_answer = text::trim(answer);
  }
  if (open != 0 && !text::trim_view(raw.substr(0, open)).empty())
    trace.warnings.push_back("text before the thinking marker ignored");
  trace.thinking = std::string(inner);

  // Partition the thinking text by headings.
  std::vector<std::pair<std::string, std::vector<std::string_view>>> parts;
  bool in_pattern = false;
  for (auto line : text::split_lines(inner)) {
    if (auto title = detail::heading_title(line)) {
      bool sub = in_pattern && detail::matches_alias(*title, opts.pattern_subheadings);
      if (!sub) {
        parts.emplace_back(*title, std::vector<std::string_view>{});
        in_pattern = detail::matches_alias(*title, opts.pattern_headings);
        continue;
      }
    }
    if (parts.empty()) parts.emplace_back(std::string(kUnsectioned), std::vector<std::string_view>{});
    parts.back().second.push_back(line);
  }
  for (auto& [heading, lines] : parts) {
    auto body = detail::join_body(lines);
    if (heading == kUnsectioned && body.empty()) continue;
    trace.sections.push_back(Section{heading, body});
  }

  for (const auto& section : trace.sections) {
    if (detail::matches_alias(section.heading, opts.graph_headings)) {
      std::vector<Diagnostic> diags;
      auto triples = parse_graph_block(section.body, &diags);
      trace.graph_block.insert(trace.graph_block.end(), triples.begin(), triples.end());
      for (auto& d : diags) {
        d.reason = section.heading + ": " + d.reason;
        trace.diagnostics.push_back(std::move(d));
      }
    } else if (detail::matches_alias(section.heading, opts.pattern_headings)) {
      std::vector<Diagnostic> diags;
      auto p = parse_pattern_block(section.body, &diags);
      if (!trace.pattern) {
        trace.pattern = std::move(p);
      } else {
        for (auto& r : p.relations) {
          detail::declare_relation_states(*trace.pattern, r);
          trace.pattern->relations.push_back(std::move(r));
        }
        for (auto& s : p.states) {
          auto& st = trace.pattern->declare(s.symbol);
          if (st.binding.empty() && !s.binding.empty()) {
            st.binding = s.binding;
            st.auto_declared = false;
          }
        }
        if (trace.pattern->context.empty()) trace.pattern->context = p.context;
      }
      for (auto& d : diags) {
        d.reason = section.heading + ": " + d.reason;
        trace.diagnostics.push_back(std::move(d));
      }
    }
  }
  return trace;
}

// Emission -----------------------------------------------------------------

inline std::string format_triple(const Triple& t) {
  std::string out = "**" + t.subject + "** -[" + t.relation + "]-> **" + t.object + "**";
  if (!t.note.empty()) out += " (" + t.note + ")";
  return out;
}

inline std::string format_relation(const PatternRelation& r) {
  auto side = [](const std::vector<std::string>& syms) { return text::join(syms, ", "); };
  std::string core = side(r.lhs) + " " + std::string(operator_glyph(r.kind)) + " " + side(r.rhs);
  if (r.conditional.empty()) return core;
  std::vector<std::string> ants;
  for (const auto& a : r.conditional) ants.push_back(format_relation(a));
  return "If " + text::join(ants, " and ") + " then " + core;
}

inline std::string serialize_graph_block(const std::vector<Triple>& triples) {
  std::string out;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    out += std::to_string(i + 1) + ". " + format_triple(triples[i]);
    if (i + 1 < triples.size()) out += '\n';
  }
  return out;
}

inline std::string serialize_pattern_block(const AbstractPattern& p) {
  std::vector<std::string> chunks;
  std::string rels;
  for (std::size_t i = 0; i < p.relations.size(); ++i) {
    if (i) rels += '\n';
    rels += format_relation(p.relations[i]);
  }
  if (!rels.empty()) chunks.push_back(rels);
  std::string bound;
  for (const auto& s : p.states) {
    if (s.binding.empty()) continue;
    if (!bound.empty()) bound += '\n';
    bound += "- " + s.symbol + " represents **" + s.binding + "**";
  }
  if (!bound.empty()) chunks.push_back("**Explanation:**\n\n" + bound);
  if (!p.context.empty()) chunks.push_back("Pattern Context:\n" + p.context);
  return text::join(chunks, "\n\n");
}

/// Emits the canonical format. parse_response(serialize_trace(t)) is
/// structurally equal to t for traces produced by parse_response.
inline std::string serialize_trace(const ReasoningTrace& trace,
                                   const FormatOptions& opts = default_format_options()) {
  if (!trace.thinking_present) return trace.final_answer;
  std::vector<std::string> chunks;
  bool graph_done = false, pattern_done = false;
  for (const auto& s : trace.sections) {
    std::string body = s.body;
    if (detail::matches_alias(s.heading, opts.graph_headings)) {
      body = graph_done ? std::string{} : serialize_graph_block(trace.graph_block);
      graph_done = true;
    } else if (detail::matches_alias(s.heading, opts.pattern_headings)) {
      body = (pattern_done || !trace.pattern) ? std::string{} : serialize_pattern_block(*trace.pattern);
      pattern_done = true;
    }
    if (s.heading == kUnsectioned) {
      chunks.push_back(body);
    } else if (body.empty()) {
      chunks.push_back("**" + s.heading + ":**");
    } else {
      chunks.push_back("**" + s.heading + ":**\n\n" + body);
    }
  }
  std::string out(kThinkingOpen);
  out += '\n';
  if (!chunks.empty()) out += text::join(chunks, "\n\n") + "\n";
  out += kThinkingClose;
  out += '\n';
  if (!trace.final_answer.empty()) out += "\n" + trace.final_answer;
  return out;
}

/// Equality on the structured parts and the free text of a trace; raw bodies
/// of knowledge-graph and pattern sections are compared through their parsed
/// form.
inline bool structurally_equal(const ReasoningTrace& a, const ReasoningTrace& b,
                               const FormatOptions& opts = default_format_options()) {
  if (a.thinking_present != b.thinking_present || a.final_answer != b.final_answer) return false;
  if (a.graph_block != b.graph_block || a.pattern != b.pattern) return false;
  if (a.sections.size() != b.sections.size()) return false;
  for (std::size_t i = 0; i < a.sections.size(); ++i) {
    const auto& sa = a.sections[i];
    const auto& sb = b.sections[i];
    if (sa.heading != sb.heading) return false;
    bool structured = detail::matches_alias(sa.heading, opts.graph_headings) ||
                      detail::matches_alias(sa.heading, opts.pattern_headings);
    if (!structured && sa.body != sb.body) return false;
  }
  return true;
}

/// Text of the first thinking region, or the whole response when there is
/// none (the caller gets a warning through the trace).
inline std::string thinking_or_full_text(std::string_view raw) {
  auto trace = parse_response(raw);
  if (trace.thinking_present) return text::trim(trace.thinking);
  return text::trim(raw);
}

}  // namespace gpfo
