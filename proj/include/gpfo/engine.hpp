#pragma once

// Recursive reasoning sessions: an initial response, N rounds of
// critique -> improve -> regenerate, then take-last or integrate-all.

#include <exception>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpfo/gateway.hpp"
#include "gpfo/graph.hpp"
#include "gpfo/graph_io.hpp"
#include "gpfo/prompts.hpp"
#include "gpfo/reasoning_format.hpp"

namespace gpfo {

enum class Agent { Reasoner, Critic };

inline std::string to_string(Agent a) { return a == Agent::Reasoner ? "reasoner" : "critic"; }

inline Agent agent_from_string(std::string_view s) {
  if (s == "reasoner") return Agent::Reasoner;
  if (s == "critic") return Agent::Critic;
  throw std::invalid_argument("unknown agent: " + std::string(s));
}

struct SessionConfig {
  int iterations = 3;
  bool integrate = false;
  bool integrate_include_initial = true;
  llm::AgentProfile reasoner;
  llm::AgentProfile critic;
  Agent improver = Agent::Critic;
  Agent integrator = Agent::Critic;

  void validate() const {
    if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  }

  static SessionConfig from_gateway(const llm::GatewayConfig& g) {
    SessionConfig c;
    c.reasoner = g.profile(llm::kReasoner);
    c.critic = g.profile(llm::kCritic);
    return c;
  }

  const llm::AgentProfile& profile(Agent a) const { return a == Agent::Reasoner ? reasoner : critic; }
};

enum class CallKind { Initial, Critique, Improve, Regenerate, Integrate, Followup };

inline std::string to_string(CallKind k) {
  switch (k) {
    case CallKind::Initial: return "initial";
    case CallKind::Critique: return "critique";
    case CallKind::Improve: return "improve";
    case CallKind::Regenerate: return "regenerate";
    case CallKind::Integrate: return "integrate";
    case CallKind::Followup: return "followup";
  }
  return "initial";
}

inline CallKind call_kind_from_string(std::string_view s) {
  for (auto k : {CallKind::Initial, CallKind::Critique, CallKind::Improve, CallKind::Regenerate, CallKind::Integrate,
                 CallKind::Followup})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown call kind: " + std::string(s));
}

struct TranscriptEntry {
  CallKind kind = CallKind::Initial;
  Agent agent = Agent::Reasoner;
  int iteration = 0;
  llm::ChatRequest request;
  std::string reply;
};

struct IterationRecord {
  int index = 0;
  ReasoningTrace trace;
  std::string critique;           // empty for the initial record
  std::string improved_thinking;  // empty for the initial record
  std::string response_raw;
  std::vector<std::string> warnings;
};

struct ReasoningSession {
  std::string task;
  StepRef provenance;
  std::vector<IterationRecord> records;
  std::string final_answer;
  bool integrated = false;
  KnowledgeGraph merged_graph;
  std::vector<TranscriptEntry> transcript;
};

/// A gateway failure inside a session; the records gathered so far ride along.
class SessionAborted : public llm::GatewayError {
 public:
  SessionAborted(const std::string& what, ReasoningSession partial, std::exception_ptr cause)
      : llm::GatewayError(what), partial_(std::move(partial)), cause_(std::move(cause)) {}
  const ReasoningSession& partial() const { return partial_; }
  std::exception_ptr cause() const { return cause_; }

 private:
  ReasoningSession partial_;
  std::exception_ptr cause_;
};

/// Prefill framing for regeneration: the improved thinking, closed, as the
/// start of the reasoner's own turn.
inline std::string regeneration_prefix(std::string_view improved_thinking) {
  return std::string(kThinkingOpen) + "\n" + std::string(improved_thinking) + "\n" + std::string(kThinkingClose) + "\n";
}

/// Full response text of a regeneration turn; a reply that restates the
/// thinking block stands alone.
inline std::string regenerated_response(std::string_view prefix, std::string_view reply) {
  if (text::trim_view(reply).substr(0, kThinkingOpen.size()) == kThinkingOpen) return std::string(reply);
  return std::string(prefix) + std::string(reply);
}

namespace detail {

inline IterationRecord make_record(int index, std::string raw, const StepRef& step, KnowledgeGraph& merged) {
  IterationRecord rec;
  rec.index = index;
  rec.response_raw = std::move(raw);
  rec.trace = parse_response(rec.response_raw);
  rec.warnings = rec.trace.warnings;
  merged = merge(merged, from_triples(rec.trace.graph_block, step));
  return rec;
}

}  // namespace detail

inline std::string extract_final_answer(const ReasoningSession& s) { return s.final_answer; }

inline ReasoningSession run_session(const std::string& task, const SessionConfig& cfg, llm::Gateway& gateway,
                                    const StepRef& provenance = {"session", 0}) {
  cfg.validate();
  ReasoningSession s;
  s.task = task;
  s.provenance = provenance;

  auto call = [&](CallKind kind, Agent agent, int iteration, std::vector<llm::Message> messages) {
    auto req = llm::make_request(cfg.profile(agent), std::move(messages));
    try {
      auto res = gateway.complete(req);
      s.transcript.push_back({kind, agent, iteration, req, res.content});
      return res.content;
    } catch (const std::exception& e) {
      throw SessionAborted(to_string(kind) + " call " + std::to_string(iteration) + " failed: " + e.what(), s,
                           std::current_exception());
    }
  };

  auto initial = call(CallKind::Initial, Agent::Reasoner, 0, {{llm::Role::User, task}});
  s.records.push_back(detail::make_record(0, initial, provenance, s.merged_graph));

  for (int i = 1; i <= cfg.iterations; ++i) {
    const auto& prev = s.records.back();
    std::string think;
    std::vector<std::string> warnings;
    if (prev.trace.thinking_present) {
      think = text::trim(prev.trace.thinking);
    } else {
      think = text::trim(prev.response_raw);
      warnings.push_back("response " + std::to_string(prev.index) + " has no thinking region; critiquing full text");
    }
    auto critique = text::trim(call(CallKind::Critique, Agent::Critic, i,
                                    {{llm::Role::User, prompts::build_critique_prompt(task, think)}}));
    auto improved_reply =
        call(CallKind::Improve, cfg.improver, i, {{llm::Role::User, prompts::build_improvement_prompt(think, critique)}});
    auto improved = thinking_or_full_text(improved_reply);
    auto prefix = regeneration_prefix(improved);
    auto reply = call(CallKind::Regenerate, Agent::Reasoner, i,
                      {{llm::Role::User, task}, {llm::Role::Assistant, prefix}});
    auto rec = detail::make_record(i, regenerated_response(prefix, reply), provenance, s.merged_graph);
    rec.critique = critique;
    rec.improved_thinking = improved;
    rec.warnings.insert(rec.warnings.begin(), warnings.begin(), warnings.end());
    s.records.push_back(std::move(rec));
  }

  // With no refinement rounds there is nothing to integrate.
  if (cfg.integrate && cfg.iterations > 0) {
    std::vector<std::string> answers;
    for (const auto& r : s.records) {
      if (r.index == 0 && !cfg.integrate_include_initial) continue;
      answers.push_back(r.trace.final_answer);
    }
    s.final_answer = text::trim(call(CallKind::Integrate, cfg.integrator, cfg.iterations + 1,
                                     {{llm::Role::User, prompts::build_integration_prompt(task, answers)}}));
    s.integrated = true;
  } else {
    s.final_answer = s.records.back().trace.final_answer;
  }
  return s;
}

// Persistence -------------------------------------------------------------------

inline constexpr const char* kSessionFormat = "gpfo-session/1";

inline nlohmann::json to_json(const TranscriptEntry& t) {
  return {{"kind", to_string(t.kind)},
          {"agent", to_string(t.agent)},
          {"iteration", t.iteration},
          {"request", llm::to_json(t.request)},
          {"reply", t.reply}};
}

inline TranscriptEntry transcript_entry_from_json(const nlohmann::json& j) {
  return {call_kind_from_string(j.at("kind").get<std::string>()), agent_from_string(j.at("agent").get<std::string>()),
          j.at("iteration").get<int>(), llm::request_from_json(j.at("request")), j.at("reply").get<std::string>()};
}

inline nlohmann::json to_json(const Triple& t) {
  nlohmann::json j{{"subject", t.subject}, {"relation", t.relation}, {"object", t.object}};
  if (!t.note.empty()) j["note"] = t.note;
  return j;
}

inline nlohmann::json to_json(const IterationRecord& r) {
  auto triples = nlohmann::json::array();
  for (const auto& t : r.trace.graph_block) triples.push_back(to_json(t));
  auto sections = nlohmann::json::array();
  for (const auto& s : r.trace.sections) sections.push_back({{"heading", s.heading}, {"body", s.body}});
  nlohmann::json j{{"index", r.index},
                   {"response_raw", r.response_raw},
                   {"critique", r.critique},
                   {"improved_thinking", r.improved_thinking},
                   {"thinking_present", r.trace.thinking_present},
                   {"thinking", r.trace.thinking},
                   {"sections", std::move(sections)},
                   {"triples", std::move(triples)},
                   {"final_answer", r.trace.final_answer},
                   {"warnings", r.warnings}};
  if (r.trace.pattern) {
    auto rel = nlohmann::json::array();
    for (const auto& p : r.trace.pattern->relations) rel.push_back(format_relation(p));
    j["pattern"] = rel;
  }
  return j;
}

inline IterationRecord record_from_json(const nlohmann::json& j) {
  IterationRecord r;
  r.index = j.at("index").get<int>();
  r.response_raw = j.at("response_raw").get<std::string>();
  r.trace = parse_response(r.response_raw);
  r.critique = j.value("critique", std::string{});
  r.improved_thinking = j.value("improved_thinking", std::string{});
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

inline nlohmann::json to_json(const ReasoningSession& s) {
  auto records = nlohmann::json::array();
  for (const auto& r : s.records) records.push_back(to_json(r));
  auto transcript = nlohmann::json::array();
  for (const auto& t : s.transcript) transcript.push_back(to_json(t));
  return {{"format", kSessionFormat},
          {"task", s.task},
          {"provenance", {s.provenance.session_id, s.provenance.step_index}},
          {"records", std::move(records)},
          {"final_answer", s.final_answer},
          {"integrated", s.integrated},
          {"merged_graph", to_json(s.merged_graph)},
          {"transcript", std::move(transcript)}};
}

inline ReasoningSession session_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kSessionFormat)
    throw std::runtime_error("not a " + std::string(kSessionFormat) + " document");
  ReasoningSession s;
  s.task = j.at("task").get<std::string>();
  s.provenance = {j.at("provenance").at(0).get<std::string>(), j.at("provenance").at(1).get<std::uint32_t>()};
  for (const auto& r : j.at("records")) s.records.push_back(record_from_json(r));
  s.final_answer = j.at("final_answer").get<std::string>();
  s.integrated = j.value("integrated", false);
  s.merged_graph = graph_from_json(j.at("merged_graph"));
  for (const auto& t : j.value("transcript", nlohmann::json::array())) s.transcript.push_back(transcript_entry_from_json(t));
  return s;
}

/// JSON lines: a header, one line per record, and a closing summary line.
inline std::string to_jsonl(const ReasoningSession& s) {
  std::string out;
  out += nlohmann::json{{"format", kSessionFormat},
                        {"type", "header"},
                        {"task", s.task},
                        {"provenance", {s.provenance.session_id, s.provenance.step_index}}}
             .dump() +
         "\n";
  for (const auto& r : s.records) {
    auto j = to_json(r);
    j["type"] = "record";
    out += j.dump() + "\n";
  }
  out += nlohmann::json{{"type", "final"},
                        {"final_answer", s.final_answer},
                        {"integrated", s.integrated},
                        {"merged_graph", to_json(s.merged_graph)}}
             .dump() +
         "\n";
  return out;
}

/// Human-readable dump of every prompt and reply, in call order.
inline std::string render_transcript(const std::vector<TranscriptEntry>& transcript) {
  std::ostringstream out;
  for (std::size_t n = 0; n < transcript.size(); ++n) {
    const auto& t = transcript[n];
    out << "##### call " << n + 1 << ": " << to_string(t.kind) << " (" << to_string(t.agent) << ", iteration "
        << t.iteration << ")\n";
    for (const auto& m : t.request.messages) out << "=== " << llm::to_string(m.role) << " ===\n" << m.content << "\n";
    out << "=== reply ===\n" << t.reply << "\n";
  }
  return out.str();
}

/// A scripted mock that reproduces a recorded transcript, each entry
/// expecting the exact recorded prompt.
inline std::vector<llm::ScriptEntry> replay_script(const std::vector<TranscriptEntry>& transcript) {
  std::vector<llm::ScriptEntry> script;
  for (const auto& t : transcript) script.push_back({t.request.flattened(), t.reply});
  return script;
}

}  // namespace gpfo
