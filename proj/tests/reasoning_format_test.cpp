#include <gtest/gtest.h>

#include <random>
#include <set>

#include "gpfo/reasoning_format.hpp"
#include "support/fixtures.hpp"
#include "support/parser_golden.hpp"

namespace gpfo {
namespace {

using testing::read_fixture;
using testing::wrap_thinking;

// parse_response -----------------------------------------------------------

TEST(ParseResponse, NoMarkersIsAllFinalAnswer) {
  auto t = parse_response("Hello.");
  EXPECT_FALSE(t.thinking_present);
  EXPECT_EQ(t.final_answer, "Hello.");
  EXPECT_TRUE(t.graph_block.empty());
  EXPECT_FALSE(t.pattern.has_value());
}

TEST(ParseResponse, UnclosedMarkerSetsWarningAndKeepsContent) {
  auto t = parse_response("<|thinking|>x");
  EXPECT_TRUE(t.malformed_delimiters);
  EXPECT_EQ(t.final_answer, "");
  ASSERT_EQ(t.sections.size(), 1u);
  EXPECT_EQ(t.sections[0].heading, kUnsectioned);
  EXPECT_EQ(t.sections[0].body, "x");
  EXPECT_FALSE(t.warnings.empty());
}

TEST(ParseResponse, MusicExampleEndToEnd) {
  auto t = parse_response(read_fixture("fixtures/music_response.txt"));
  EXPECT_TRUE(t.thinking_present);
  EXPECT_FALSE(t.malformed_delimiters);
  EXPECT_GE(t.graph_block.size(), 10u);
  ASSERT_TRUE(t.pattern.has_value());
  EXPECT_EQ(t.final_answer.rfind("**Proposed Idea: \"Music-Inspired Material Tuning\"**", 0), 0u);

  std::vector<std::string> headings;
  for (const auto& s : t.sections) headings.push_back(s.heading);
  std::vector<std::string> expected{"Knowledge Graph",
                                    "Abstract Pattern",
                                    "Reasoning Steps",
                                    "Relevant Materials or Concepts",
                                    "Design Principles",
                                    "Material Properties",
                                    "Hypothesis",
                                    "Additional Background"};
  EXPECT_EQ(headings, expected);
}

TEST(ParseResponse, OnlyFirstThinkingRegionIsParsed) {
  auto t = parse_response(
      "<|thinking|>\n**Knowledge Graph:**\n1. **A** -[IS-A]-> **B**\n<|/thinking|>\nanswer\n"
      "<|thinking|>\n**Knowledge Graph:**\n1. **C** -[IS-A]-> **D**\n<|/thinking|>");
  ASSERT_EQ(t.graph_block.size(), 1u);
  EXPECT_EQ(t.graph_block[0].subject, "A");
  EXPECT_NE(t.final_answer.find("**C** -[IS-A]-> **D**"), std::string::npos);
  EXPECT_FALSE(t.warnings.empty());
}

TEST(ParseResponse, ContentBeforeFirstHeadingIsUnsectioned) {
  auto t = parse_response("<|thinking|>\nLet me think.\n\n**Hypothesis:**\nH\n<|/thinking|>\nA");
  ASSERT_EQ(t.sections.size(), 2u);
  EXPECT_EQ(t.sections[0].heading, kUnsectioned);
  EXPECT_EQ(t.sections[0].body, "Let me think.");
  EXPECT_EQ(t.sections[1].heading, "Hypothesis");
  EXPECT_EQ(t.sections[1].body, "H");
}

TEST(ParseResponse, MarkdownHeadingsAndCoreConceptsAlias) {
  auto t = parse_response(
      "<|thinking|>\n### Core Concepts and Relationships\n- **X** -[relates to]-> **Y**\n"
      "### Reasoning Steps\n1. step\n<|/thinking|>\nok");
  ASSERT_EQ(t.graph_block.size(), 1u);
  EXPECT_EQ(t.graph_block[0].relation, "RELATES-TO");
  EXPECT_EQ(t.sections.back().heading, "Reasoning Steps");
}

TEST(ParseResponse, NeverThrowsOnRandomBytes) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> pieces{"<|thinking|>", "<|/thinking|>", "**", ":**", "-[", "]->",
                                        "\n",           "α",             "→",  "∝",   "If ", " then ",
                                        "# ",           "1. ",           "(",  ")",   "\xCE", "\xFF"};
  for (int iter = 0; iter < 2000; ++iter) {
    std::string s;
    auto len = rng() % 40;
    for (std::size_t k = 0; k < len; ++k) {
      if (rng() % 3 == 0) s += pieces[rng() % pieces.size()];
      else s += static_cast<char>(rng() % 256);
    }
    EXPECT_NO_THROW({
      auto t = parse_response(s);
      auto again = serialize_trace(t);
      (void)parse_response(again);
    });
  }
}

// parse_graph_block --------------------------------------------------------

TEST(GraphBlock, SingleNumberedTriple) {
  auto triples = parse_graph_block("1. **Music** -[IS-A]-> **Audio Signal**");
  ASSERT_EQ(triples.size(), 1u);
  EXPECT_EQ(triples[0], (Triple{"Music", "IS-A", "Audio Signal", ""}));
}

TEST(GraphBlock, ChainedArrowsShareMiddleNode) {
  auto triples = parse_graph_block(
      "**Music** -[INFLUENCES]-> **Nonlinear Dynamic Response** -[INFLUENCES]-> "
      "**Material's Mechanical Properties**");
  ASSERT_EQ(triples.size(), 2u);
  EXPECT_EQ(triples[0].object, "Nonlinear Dynamic Response");
  EXPECT_EQ(triples[1].subject, "Nonlinear Dynamic Response");
  EXPECT_EQ(triples[1].object, "Material's Mechanical Properties");
}

TEST(GraphBlock, EmptyBlock) { EXPECT_TRUE(parse_graph_block("").empty()); }

TEST(GraphBlock, ParentheticalBecomesEdgeNote) {
  auto triples = parse_graph_block("5. **Snow Flakes** -[INFLUENCES]-> **Mood** (e.g., Serene, Calming)");
  ASSERT_EQ(triples.size(), 1u);
  EXPECT_EQ(triples[0].object, "Mood");
  EXPECT_EQ(triples[0].note, "e.g., Serene, Calming");
}

TEST(GraphBlock, BareLabelsAndBulletMarkers) {
  auto triples = parse_graph_block("- Music -[is a]-> Audio Signal\n* A -[X]-> B -[Y]-> C");
  ASSERT_EQ(triples.size(), 3u);
  EXPECT_EQ(triples[0], (Triple{"Music", "IS-A", "Audio Signal", ""}));
  EXPECT_EQ(triples[2], (Triple{"B", "Y", "C", ""}));
}

TEST(GraphBlock, UnparseableLinesAreDiagnosedNotFatal) {
  std::vector<Diagnostic> diags;
  auto triples = parse_graph_block("just prose\n1. **A** -[IS-A]-> **B**\n**A** -[]-> **B**", &diags);
  EXPECT_EQ(triples.size(), 1u);
  ASSERT_EQ(diags.size(), 2u);
  EXPECT_EQ(diags[0].line, 1u);
  EXPECT_EQ(diags[1].line, 3u);
}

TEST(GraphBlock, MusicBlockMatchesGoldenTriples) {
  auto triples = parse_graph_block(read_fixture("fixtures/music_graph_block.txt"));
  EXPECT_EQ(triples, testing::golden_music_triples());
}

TEST(GraphBlock, ChainExpansionCountProperty) {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    int k = 1 + static_cast<int>(rng() % 6);
    std::string line = "**N0**";
    for (int j = 1; j <= k; ++j) line += " -[R" + std::to_string(j) + "]-> **N" + std::to_string(j) + "**";
    auto triples = parse_graph_block(line);
    ASSERT_EQ(triples.size(), static_cast<std::size_t>(k));
    for (int j = 0; j + 1 < k; ++j) EXPECT_EQ(triples[j].object, triples[j + 1].subject);
  }
}

// parse_pattern_block ------------------------------------------------------

TEST(PatternBlock, ArrowChainExpandsPairwise) {
  auto p = parse_pattern_block("α → β → γ");
  ASSERT_EQ(p.states.size(), 3u);
  EXPECT_EQ(p.states[0].symbol, "α");
  EXPECT_EQ(p.states[2].symbol, "γ");
  ASSERT_EQ(p.relations.size(), 2u);
  EXPECT_EQ(p.relations[0], (PatternRelation{RelationKind::Arrow, {"α"}, {"β"}, {}}));
  EXPECT_EQ(p.relations[1], (PatternRelation{RelationKind::Arrow, {"β"}, {"γ"}, {}}));
}

TEST(PatternBlock, SongExampleCounts) {
  auto p = parse_pattern_block(read_fixture("fixtures/song_pattern_block.txt"));
  auto c = testing::count_relations(p);
  EXPECT_EQ(c.arrows, 8u);
  EXPECT_EQ(c.conditionals, 1u);
  EXPECT_EQ(c.not_equal, 1u);
  EXPECT_EQ(c.proportional, 0u);
  EXPECT_FALSE(p.context.empty());
}

TEST(PatternBlock, ConditionalRule) {
  auto p = parse_pattern_block("If α → δ and β → δ then δ → ε");
  ASSERT_EQ(p.relations.size(), 1u);
  const auto& r = p.relations[0];
  EXPECT_EQ(r.kind, RelationKind::Arrow);
  EXPECT_EQ(r.lhs, std::vector<std::string>{"δ"});
  EXPECT_EQ(r.rhs, std::vector<std::string>{"ε"});
  ASSERT_EQ(r.conditional.size(), 2u);
  EXPECT_EQ(r.conditional[0].lhs, std::vector<std::string>{"α"});
  EXPECT_EQ(r.conditional[1].lhs, std::vector<std::string>{"β"});
}

TEST(PatternBlock, NotEqual) {
  auto p = parse_pattern_block("α ≠ β");
  ASSERT_EQ(p.relations.size(), 1u);
  EXPECT_EQ(p.relations[0].kind, RelationKind::NotEqual);
}

TEST(PatternBlock, LatexSpellingsAndEpsilonVariants) {
  auto p = parse_pattern_block("$\\alpha \\propto \\varepsilon$\nα → ϵ\n\\beta \\neq \\epsilon");
  ASSERT_EQ(p.relations.size(), 3u);
  EXPECT_EQ(p.relations[0].kind, RelationKind::Proportional);
  EXPECT_EQ(p.relations[0].rhs, std::vector<std::string>{"ε"});
  EXPECT_EQ(p.relations[1].rhs, std::vector<std::string>{"ε"});
  EXPECT_EQ(p.relations[2].kind, RelationKind::NotEqual);
  std::set<std::string> symbols;
  for (const auto& s : p.states) symbols.insert(s.symbol);
  EXPECT_EQ(symbols, (std::set<std::string>{"α", "β", "ε"}));
}

TEST(PatternBlock, GroupedSides) {
  auto p = parse_pattern_block("α, β → γ");
  ASSERT_EQ(p.relations.size(), 1u);
  EXPECT_EQ(p.relations[0].lhs, (std::vector<std::string>{"α", "β"}));
}

TEST(PatternBlock, MusicBindingsAndContext) {
  auto block = read_fixture("fixtures/music_pattern_block.txt");
  auto t = parse_response(wrap_thinking(block));
  ASSERT_TRUE(t.pattern.has_value());
  const auto& p = *t.pattern;
  ASSERT_EQ(p.relations.size(), 4u);
  EXPECT_EQ(p.relations[2].kind, RelationKind::Proportional);
  EXPECT_EQ(p.relations[3], (PatternRelation{RelationKind::Arrow, {"γ"}, {"α"}, {}}));
  ASSERT_NE(p.find_state("α"), nullptr);
  EXPECT_EQ(p.find_state("α")->binding, "Music");
  EXPECT_EQ(p.find_state("β")->binding, "Material");
  EXPECT_EQ(p.find_state("γ")->binding, "Material's Mechanical Properties");
  EXPECT_FALSE(p.find_state("γ")->auto_declared);
  EXPECT_EQ(p.context.rfind("Inspire a new method", 0), 0u);
  EXPECT_TRUE(t.diagnostics.empty());
}

TEST(PatternBlock, UnboundStatesAreFlagged) {
  auto p = parse_pattern_block("α → β\n- α represents **Music**");
  EXPECT_FALSE(p.find_state("α")->auto_declared);
  EXPECT_TRUE(p.find_state("β")->auto_declared);
}

TEST(PatternBlock, ProseIsDiagnosed) {
  std::vector<Diagnostic> diags;
  auto p = parse_pattern_block("α → β\nthis is prose", &diags);
  EXPECT_EQ(p.relations.size(), 1u);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].line, 2u);
}

// serialize_trace ----------------------------------------------------------

TEST(Serialize, SingleTripleEmission) {
  ReasoningTrace t;
  t.thinking_present = true;
  t.sections.push_back({"Knowledge Graph", ""});
  t.graph_block.push_back({"A", "IS-A", "B", ""});
  auto out = serialize_trace(t);
  EXPECT_NE(out.find("1. **A** -[IS-A]-> **B**"), std::string::npos);
  EXPECT_NE(out.find("**Knowledge Graph:**"), std::string::npos);
}

TEST(Serialize, EmptyTraceIsFinalAnswerOnly) {
  ReasoningTrace t;
  EXPECT_EQ(serialize_trace(t), "");
  t.final_answer = "done";
  EXPECT_EQ(serialize_trace(t), "done");
}

TEST(Serialize, MusicRoundTrip) {
  auto first = parse_response(read_fixture("fixtures/music_response.txt"));
  auto second = parse_response(serialize_trace(first));
  EXPECT_TRUE(structurally_equal(first, second));
  auto third = parse_response(serialize_trace(second));
  EXPECT_EQ(serialize_trace(second), serialize_trace(third));
}

// Round-trip property over generated traces.
class TraceGenerator {
 public:
  explicit TraceGenerator(std::uint64_t seed) : rng_(seed) {}

  ReasoningTrace next() {
    ReasoningTrace t;
    t.thinking_present = true;
    if (coin()) t.sections.push_back({std::string(kUnsectioned), sentence_lines()});
    std::vector<std::string> pool{"Knowledge Graph", "Abstract Pattern", "Reasoning Steps",
                                  "Hypothesis",      "Design Principles", "Additional Background"};
    std::shuffle(pool.begin(), pool.end(), rng_);
    auto count = 1 + rng_() % pool.size();
    for (std::size_t i = 0; i < count; ++i) {
      const auto& h = pool[i];
      if (h == "Knowledge Graph") {
        t.sections.push_back({h, ""});
        auto n = rng_() % 6;
        for (std::size_t k = 0; k < n; ++k) t.graph_block.push_back(triple());
      } else if (h == "Abstract Pattern") {
        t.sections.push_back({h, ""});
        t.pattern = pattern();
      } else {
        t.sections.push_back({h, sentence_lines()});
      }
    }
    t.final_answer = coin() ? std::string{} : "**Answer:**\n" + sentence_lines();
    return t;
  }

 private:
  bool coin() { return rng_() % 2 == 0; }
  std::string pick(const std::vector<std::string>& v) { return v[rng_() % v.size()]; }

  std::string sentence_lines() {
    static const std::vector<std::string> words{"music", "material", "frequency", "α", "flow",
                                                "1.",    "damping",  "(note)",    "-", "→"};
    std::string out;
    auto lines = 1 + rng_() % 3;
    for (std::size_t l = 0; l < lines; ++l) {
      if (l) out += '\n';
      out += "Line";
      auto n = 1 + rng_() % 6;
      for (std::size_t k = 0; k < n; ++k) out += " " + pick(words);
    }
    return out;
  }

  Triple triple() {
    static const std::vector<std::string> labels{"Music", "Audio Signal", "Material's Mechanical Properties",
                                                 "Snow Flakes", "Mood", "Frequency Spectrum"};
    static const std::vector<std::string> rels{"IS-A", "RELATES-TO", "INFLUENCES", "PART-OF"};
    Triple t{pick(labels), pick(rels), pick(labels), ""};
    if (rng_() % 4 == 0) t.note = "e.g., Serene, Calming";
    return t;
  }

  AbstractPattern pattern() {
    static const std::vector<std::string> syms{"α", "β", "γ", "δ", "ε", "ζ"};
    AbstractPattern p;
    auto rel = [&] {
      PatternRelation r;
      r.kind = static_cast<RelationKind>(rng_() % 3);
      r.lhs.push_back(pick(syms));
      if (rng_() % 5 == 0) r.lhs.push_back(pick(syms));
      r.rhs.push_back(pick(syms));
      return r;
    };
    auto n = rng_() % 5;
    for (std::size_t i = 0; i < n; ++i) {
      auto r = rel();
      if (rng_() % 4 == 0) {
        r.conditional.push_back(rel());
        if (coin()) r.conditional.push_back(rel());
      }
      p.relations.push_back(r);
    }
    for (const auto& r : p.relations) detail::declare_relation_states(p, r);
    for (auto& s : p.states) {
      if (coin()) {
        s.binding = pick({"Music", "Material", "Nature's Beauty"});
        s.auto_declared = false;
      }
    }
    if (coin()) {
      auto& extra = p.declare("ω");
      extra.binding = "Extra Concept";
      extra.auto_declared = false;
    }
    if (coin()) p.context = "The context paragraph.\nSecond line.";
    return p;
  }

  std::mt19937_64 rng_;
};

TEST(Serialize, RoundTripPropertyOverGeneratedTraces) {
  TraceGenerator gen(2024);
  for (int i = 0; i < 500; ++i) {
    auto t = gen.next();
    auto text = serialize_trace(t);
    auto parsed = parse_response(text);
    ASSERT_TRUE(structurally_equal(t, parsed)) << "iteration " << i << "\n" << text;
    EXPECT_TRUE(parsed.diagnostics.empty()) << text;
  }
}

}  // namespace
}  // namespace gpfo
