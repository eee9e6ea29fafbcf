#include <gtest/gtest.h>

#include "gpfo/engine.hpp"
#include "support/fixtures.hpp"
#include "support/session_fixture.hpp"

using namespace gpfo;
using gpfo::testing::load_script_fixture;
using gpfo::testing::read_fixture;
using gpfo::testing::render_messages;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

SessionConfig n3_config() {
  SessionConfig c;
  c.iterations = 3;
  c.integrate = true;
  c.reasoner.model_name = "graph-reasoner";
  c.critic.model_name = "general-critic";
  return c;
}

std::string response(const std::string& thinking, const std::string& answer) {
  return "<|thinking|>\n" + thinking + "\n<|/thinking|>\n\n" + answer;
}

}  // namespace

// Templates ---------------------------------------------------------------------

TEST(Prompts, CritiqueGolden) {
  auto p = prompts::build_critique_prompt("Q", "T");
  EXPECT_EQ(p, read_fixture("golden/templates/critique_Q_T.txt"));
  EXPECT_NE(p.find("Question: Q"), std::string::npos);
  EXPECT_NE(p.find("Thought process: T"), std::string::npos);
  EXPECT_TRUE(p.ends_with("The feedback is:"));
}

TEST(Prompts, CritiqueEmptyThinkAndLiteralBraces) {
  auto empty = prompts::build_critique_prompt("Q", "");
  EXPECT_NE(empty.find("Thought process: \n"), std::string::npos);
  auto braces = prompts::build_critique_prompt("{think}", "{question} {x}");
  EXPECT_NE(braces.find("Question: {think}\n"), std::string::npos);
  EXPECT_NE(braces.find("Thought process: {question} {x}\n"), std::string::npos);
}

TEST(Prompts, ImprovementGolden) {
  auto p = prompts::build_improvement_prompt("T", "F");
  EXPECT_EQ(p, read_fixture("golden/templates/improvement_T_F.txt"));
  EXPECT_LT(p.find("Thought process: T"), p.find("Feedback: F"));
  EXPECT_TRUE(p.ends_with("The revised thought process is:"));
  EXPECT_EQ(p, prompts::build_improvement_prompt("T", "F"));
  auto u = prompts::build_improvement_prompt("T", "α ∝ ε — ü 漢");
  EXPECT_NE(u.find("Feedback: α ∝ ε — ü 漢\n"), std::string::npos);
}

TEST(Prompts, IntegrationGolden) {
  EXPECT_EQ(prompts::build_integration_prompt("Q", {"A"}), read_fixture("golden/templates/integration_Q_A.txt"));
  auto four = prompts::build_integration_prompt("Q", {"a", "b", "c", "d"});
  EXPECT_NE(four.find("ANSWER #0: a\nANSWER #1: b\nANSWER #2: c\nANSWER #3: d\n"), std::string::npos);
  EXPECT_TRUE(four.ends_with("The answer is:"));
  EXPECT_THROW(prompts::build_integration_prompt("Q", {}), prompts::EmptyAnswers);
}

TEST(Prompts, FollowupGolden) {
  auto p = prompts::build_followup_prompt("Music, Material");
  EXPECT_EQ(p, read_fixture("golden/templates/followup_music_material.txt"));
  EXPECT_NE(p.find("Original list of topics/keywords:\n\nMusic, Material\n"), std::string::npos);
  EXPECT_TRUE(p.ends_with("The new question is:"));
  EXPECT_THROW(prompts::build_followup_prompt(""), std::invalid_argument);
}

// Sessions ------------------------------------------------------------------------

TEST(Engine, N3TranscriptMatchesGoldenFiles) {
  auto fx = load_script_fixture("fixtures/session_n3_script.json");
  llm::ScriptedMock mock(fx.script);
  auto s = run_session(fx.task, n3_config(), mock);
  const auto& names = gpfo::testing::session_n3_golden_names();
  auto requests = mock.requests();
  ASSERT_EQ(requests.size(), 11u);
  ASSERT_EQ(s.transcript.size(), 11u);
  for (std::size_t i = 0; i < names.size(); ++i)
    EXPECT_EQ(render_messages(requests[i]), read_fixture("golden/session_n3/" + names[i] + ".txt")) << names[i];

  std::vector<CallKind> kinds;
  std::vector<Agent> agents;
  for (const auto& t : s.transcript) {
    kinds.push_back(t.kind);
    agents.push_back(t.agent);
  }
  using K = CallKind;
  EXPECT_EQ(kinds, (std::vector<K>{K::Initial, K::Critique, K::Improve, K::Regenerate, K::Critique, K::Improve,
                                   K::Regenerate, K::Critique, K::Improve, K::Regenerate, K::Integrate}));
  using A = Agent;
  EXPECT_EQ(agents, (std::vector<A>{A::Reasoner, A::Critic, A::Critic, A::Reasoner, A::Critic, A::Critic, A::Reasoner,
                                    A::Critic, A::Critic, A::Reasoner, A::Critic}));
  EXPECT_EQ(requests[0].model_name, "graph-reasoner");
  EXPECT_EQ(requests[1].model_name, "general-critic");

  const auto& integration = requests.back().messages[0].content;
  for (int k = 0; k <= 3; ++k) EXPECT_EQ(count_of(integration, "ANSWER #" + std::to_string(k) + ":"), 1u);
  EXPECT_EQ(count_of(integration, "ANSWER #4"), 0u);

  ASSERT_EQ(s.records.size(), 4u);
  EXPECT_TRUE(s.integrated);
  EXPECT_EQ(s.final_answer, "Final integrated answer.");
  EXPECT_TRUE(s.records[0].critique.empty());
  for (int i = 1; i <= 3; ++i) {
    EXPECT_FALSE(s.records[i].critique.empty());
    EXPECT_FALSE(s.records[i].improved_thinking.empty());
    EXPECT_TRUE(s.records[i].trace.thinking_present);
    EXPECT_EQ(s.records[i].trace.final_answer, "Answer " + std::to_string(i) + ": resonant spinning at stage " +
                                                   std::to_string(i) + ".");
  }
  // each round adds one vibration node
  EXPECT_EQ(s.merged_graph.nodes().size(), 3u + 3u);
}

TEST(Engine, MergedGraphIsFoldOfRecordGraphs) {
  auto fx = load_script_fixture("fixtures/session_n3_script.json");
  llm::ScriptedMock mock(fx.script);
  StepRef step{"g", 4};
  auto s = run_session(fx.task, n3_config(), mock, step);
  KnowledgeGraph fold, reversed;
  for (const auto& r : s.records) fold = merge(fold, from_triples(r.trace.graph_block, step));
  for (auto it = s.records.rbegin(); it != s.records.rend(); ++it)
    reversed = merge(reversed, from_triples(it->trace.graph_block, step));
  EXPECT_EQ(s.merged_graph, fold);
  EXPECT_TRUE(same_structure(s.merged_graph, reversed));
  EXPECT_EQ(filter_by_step(s.merged_graph, step), s.merged_graph);
}

TEST(Engine, N0SingleCall) {
  llm::ScriptedMock mock({{"T", response("**Knowledge Graph:**\n\n1. **A** -[IS-A]-> **B**", "final zero")}});
  SessionConfig c;
  c.iterations = 0;
  c.integrate = true;
  auto s = run_session("T", c, mock);
  EXPECT_EQ(mock.consumed(), 1u);
  ASSERT_EQ(s.records.size(), 1u);
  EXPECT_EQ(s.final_answer, "final zero");
  EXPECT_EQ(s.final_answer, s.records[0].trace.final_answer);
  EXPECT_FALSE(s.integrated);
  EXPECT_EQ(s.merged_graph.edges().size(), 1u);
}

TEST(Engine, N1TakeLast) {
  llm::ScriptedMock mock({{"T", response("think", "first")},
                          {"Thought process: think", "be precise"},
                          {"Feedback: be precise", "better think"},
                          {"<|thinking|>\nbetter think\n<|/thinking|>\n", "\nsecond"}});
  SessionConfig c;
  c.iterations = 1;
  auto s = run_session("T", c, mock);
  EXPECT_EQ(mock.consumed(), 4u);
  ASSERT_EQ(s.records.size(), 2u);
  EXPECT_EQ(s.final_answer, "second");
  EXPECT_EQ(extract_final_answer(s), s.records[1].trace.final_answer);
  EXPECT_EQ(s.records[1].improved_thinking, "better think");
  EXPECT_EQ(s.records[1].critique, "be precise");
}

TEST(Engine, CallCountFormula) {
  for (int n = 0; n <= 4; ++n) {
    for (bool integrate : {false, true}) {
      std::vector<llm::ScriptEntry> script(1 + 3 * n + 1, {"", response("t", "a")});
      llm::ScriptedMock mock(script);
      SessionConfig c;
      c.iterations = n;
      c.integrate = integrate;
      auto s = run_session("task", c, mock);
      std::size_t expected = 1 + 2 * n + n + (integrate && n > 0 ? 1 : 0);
      EXPECT_EQ(mock.consumed(), expected) << n << integrate;
      EXPECT_EQ(s.records.size(), static_cast<std::size_t>(n + 1));
    }
  }
}

TEST(Engine, IntegrationCanExcludeInitial) {
  std::vector<llm::ScriptEntry> script;
  script.push_back({"", response("t", "a0")});
  for (int i = 1; i <= 2; ++i) {
    script.push_back({"", "fb"});
    script.push_back({"", "imp"});
    script.push_back({"", "a" + std::to_string(i)});
  }
  script.push_back({"ANSWER #0: a1\nANSWER #1: a2\n", "merged"});
  llm::ScriptedMock mock(script);
  SessionConfig c;
  c.iterations = 2;
  c.integrate = true;
  c.integrate_include_initial = false;
  auto s = run_session("task", c, mock);
  EXPECT_EQ(s.final_answer, "merged");
  EXPECT_EQ(count_of(mock.requests().back().messages[0].content, "a0"), 0u);
}

TEST(Engine, MissingThinkingCritiquesFullTextWithWarning) {
  llm::ScriptedMock mock({{"", "plain answer, no markers"},
                          {"Thought process: plain answer, no markers\n", "fb"},
                          {"", "imp"},
                          {"", "done"}});
  SessionConfig c;
  c.iterations = 1;
  auto s = run_session("task", c, mock);
  ASSERT_EQ(s.records.size(), 2u);
  ASSERT_FALSE(s.records[1].warnings.empty());
  EXPECT_NE(s.records[1].warnings[0].find("no thinking region"), std::string::npos);
}

TEST(Engine, ImproverProfileIsConfigurable) {
  std::vector<llm::ScriptEntry> script(4, {"", response("t", "a")});
  llm::ScriptedMock mock(script);
  SessionConfig c;
  c.iterations = 1;
  c.reasoner.model_name = "R";
  c.critic.model_name = "C";
  c.improver = Agent::Reasoner;
  auto s = run_session("task", c, mock);
  EXPECT_EQ(mock.requests()[2].model_name, "R");
  EXPECT_EQ(s.transcript[2].agent, Agent::Reasoner);
}

TEST(Engine, RegenerationReplyRestatingThinkingStandsAlone) {
  EXPECT_EQ(regenerated_response("PFX", "<|thinking|>\nx\n<|/thinking|>\nA"), "<|thinking|>\nx\n<|/thinking|>\nA");
  EXPECT_EQ(regenerated_response("PFX", "A"), "PFXA");
  EXPECT_EQ(regeneration_prefix("I"), "<|thinking|>\nI\n<|/thinking|>\n");
}

TEST(Engine, GatewayErrorCarriesPartialSession) {
  llm::ScriptedMock mock({{"", response("t", "a")}, {"", "fb"}});
  SessionConfig c;
  c.iterations = 2;
  try {
    run_session("task", c, mock);
    FAIL() << "expected SessionAborted";
  } catch (const SessionAborted& e) {
    EXPECT_EQ(e.partial().records.size(), 1u);
    EXPECT_EQ(e.partial().transcript.size(), 2u);
    EXPECT_THROW(std::rethrow_exception(e.cause()), llm::ScriptExhausted);
  }
  llm::ScriptedMock mock2({{"", response("t", "a")}});
  EXPECT_THROW(run_session("task", c, mock2), llm::GatewayError);
}

TEST(Engine, NegativeIterationsRejected) {
  llm::ScriptedMock mock({{"", "x"}});
  SessionConfig c;
  c.iterations = -1;
  EXPECT_THROW(run_session("t", c, mock), std::invalid_argument);
  EXPECT_EQ(mock.consumed(), 0u);
}

TEST(Engine, DeterministicUnderMock) {
  auto fx = load_script_fixture("fixtures/session_n3_script.json");
  llm::ScriptedMock m1(fx.script), m2(fx.script);
  auto a = run_session(fx.task, n3_config(), m1);
  auto b = run_session(fx.task, n3_config(), m2);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(to_jsonl(a), to_jsonl(b));
}

TEST(Engine, JsonRoundTripAndReplay) {
  auto fx = load_script_fixture("fixtures/session_n3_script.json");
  llm::ScriptedMock mock(fx.script);
  auto s = run_session(fx.task, n3_config(), mock);
  auto back = session_from_json(nlohmann::json::parse(to_json(s).dump()));
  EXPECT_EQ(to_json(back), to_json(s));

  llm::ScriptedMock replay(replay_script(s.transcript));
  auto again = run_session(fx.task, n3_config(), replay);
  EXPECT_EQ(again.merged_graph, s.merged_graph);
  EXPECT_EQ(again.final_answer, s.final_answer);
}

TEST(Engine, JsonLinesShape) {
  auto fx = load_script_fixture("fixtures/session_n3_script.json");
  llm::ScriptedMock mock(fx.script);
  auto s = run_session(fx.task, n3_config(), mock);
  auto jsonl = to_jsonl(s);
  auto lines = text::split_lines(jsonl);
  std::vector<std::string> types;
  for (auto l : lines)
    if (!l.empty()) types.push_back(nlohmann::json::parse(l).at("type").get<std::string>());
  EXPECT_EQ(types, (std::vector<std::string>{"header", "record", "record", "record", "record", "final"}));
  EXPECT_EQ(nlohmann::json::parse(lines[0]).at("format"), "gpfo-session/1");
}

TEST(Engine, RenderedTranscriptListsEveryCall) {
  auto fx = load_script_fixture("fixtures/session_n3_script.json");
  llm::ScriptedMock mock(fx.script);
  auto s = run_session(fx.task, n3_config(), mock);
  auto r = render_transcript(s.transcript);
  EXPECT_EQ(count_of(r, "##### call "), 11u);
  EXPECT_NE(r.find("##### call 4: regenerate (reasoner, iteration 1)"), std::string::npos);
}

TEST(Engine, SyntheticReasonerDrivesFullLoop) {
  llm::SyntheticReasoner gw;
  SessionConfig c;
  c.iterations = 3;
  c.integrate = true;
  auto s = run_session("How can music inform tougher spider silk?", c, gw);
  EXPECT_EQ(gw.calls(), 11);
  EXPECT_EQ(s.records.size(), 4u);
  EXPECT_FALSE(s.final_answer.empty());
  EXPECT_GE(s.merged_graph.nodes().size(), 4u);
}
