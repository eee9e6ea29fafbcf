#pragma once

// Knowledge-garden growth: each step asks a question (seed, operator-supplied
// or generated from the current integrated graph), runs a reasoning session
// on it, and merges the session graph into the garden. Sessions persist as
//   <root>/<id>/session.json
//   <root>/<id>/steps/NNN.json
//   <root>/<id>/integrated.graphml

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpfo/engine.hpp"
#include "gpfo/graph_io.hpp"
#include "gpfo/metrics.hpp"
#include "gpfo/prompts.hpp"

namespace gpfo::garden {

enum class PromptSource { Seed, Human, Autonomous };
enum class Mode { Autonomous, Steered };

inline std::string to_string(PromptSource s) {
  switch (s) {
    case PromptSource::Seed: return "seed";
    case PromptSource::Human: return "human";
    case PromptSource::Autonomous: return "autonomous";
  }
  return "seed";
}

inline PromptSource prompt_source_from_string(std::string_view s) {
  if (s == "seed") return PromptSource::Seed;
  if (s == "human") return PromptSource::Human;
  if (s == "autonomous") return PromptSource::Autonomous;
  throw std::invalid_argument("unknown prompt source: " + std::string(s));
}

inline std::string to_string(Mode m) { return m == Mode::Autonomous ? "autonomous" : "steered"; }

inline Mode mode_from_string(std::string_view s) {
  if (s == "autonomous") return Mode::Autonomous;
  if (s == "steered") return Mode::Steered;
  throw std::invalid_argument("unknown garden mode: " + std::string(s));
}

class StepLimitReached : public std::runtime_error {
 public:
  explicit StepLimitReached(std::size_t max_steps)
      : std::runtime_error("garden already has its maximum of " + std::to_string(max_steps) + " steps") {}
};

struct GrowthStep {
  std::uint32_t index = 0;
  std::string prompt;
  PromptSource source = PromptSource::Seed;
  ReasoningSession session;
  KnowledgeGraph subgraph;
  std::vector<TranscriptEntry> followup_transcript;
  std::vector<std::string> warnings;
};

struct GardenSession {
  std::string id;
  std::string seed_prompt;
  Mode mode = Mode::Autonomous;
  std::size_t max_steps = 13;
  std::vector<GrowthStep> steps;
  KnowledgeGraph integrated;
  std::optional<GraphSummary> summary;
};

struct GardenConfig {
  SessionConfig session = [] {
    SessionConfig c;
    c.iterations = 0;
    return c;
  }();
  std::size_t topic_limit = 25;
  std::string followup_template = std::string(prompts::kFollowup);
  Agent followup_agent = Agent::Critic;
};

// Topics ----------------------------------------------------------------------

/// Display labels of the `limit` highest-degree nodes, ties by NodeId.
inline std::vector<std::string> top_topics(const KnowledgeGraph& g, std::size_t limit) {
  if (limit < 1) throw std::invalid_argument("topic limit must be >= 1");
  if (g.empty()) throw EmptyGraph();
  std::vector<std::string> out;
  for (const auto& [id, d] : ranked(degree(g).values)) {
    if (out.size() == limit) break;
    out.push_back(g.nodes().at(id).display);
  }
  return out;
}

inline std::string graph_to_topic_string(const KnowledgeGraph& g, std::size_t limit = 25) {
  return text::join(top_topics(g, limit), ", ");
}

/// True iff some topic occurs in the question, comparing normalized labels
/// case-insensitively.
inline bool validate_followup(std::string_view question, const std::vector<std::string>& topics) {
  if (topics.empty()) throw std::invalid_argument("validate_followup needs at least one topic");
  auto q = text::display_label(question);
  return std::any_of(topics.begin(), topics.end(), [&](const std::string& t) {
    auto label = text::display_label(t);
    return !label.empty() && text::contains_ci(q, label);
  });
}

struct Followup {
  std::string question;
  std::vector<TranscriptEntry> transcript;
  std::vector<std::string> warnings;
};

/// Asks for a follow-up question about the integrated graph; one retry when
/// the reply names none of the topics, then accepted with a warning. An empty
/// graph falls back to the seed prompt as the topic list.
inline Followup generate_followup(const GardenSession& s, const GardenConfig& cfg, llm::Gateway& gw) {
  Followup f;
  std::vector<std::string> topics;
  std::string topic_str;
  if (s.integrated.empty()) {
    topic_str = text::collapse_whitespace(s.seed_prompt);
    f.warnings.push_back("integrated graph is empty; seed prompt used as the topic list");
  } else {
    topics = top_topics(s.integrated, cfg.topic_limit);
    topic_str = text::join(topics, ", ");
  }
  auto prompt = prompts::build_followup_prompt(topic_str, cfg.followup_template);
  const auto& profile = cfg.session.profile(cfg.followup_agent);
  for (int attempt = 1; attempt <= 2; ++attempt) {
    auto req = llm::make_request(profile, {{llm::Role::User, prompt}});
    auto reply = gw.complete(req).content;
    f.transcript.push_back({CallKind::Followup, cfg.followup_agent, attempt, req, reply});
    f.question = text::trim(reply);
    if (topics.empty() || validate_followup(f.question, topics)) return f;
    if (attempt == 1) f.warnings.push_back("follow-up named none of the topics; regenerating");
  }
  f.warnings.push_back("follow-up accepted without naming a topic");
  return f;
}

// Persistence ---------------------------------------------------------------------

inline constexpr const char* kGardenFormat = "gpfo-garden/1";
inline constexpr const char* kStepFormat = "gpfo-garden-step/1";

inline nlohmann::json to_json(const GrowthStep& st) {
  auto followup = nlohmann::json::array();
  for (const auto& t : st.followup_transcript) followup.push_back(gpfo::to_json(t));
  return {{"format", kStepFormat},
          {"index", st.index},
          {"prompt", st.prompt},
          {"prompt_source", to_string(st.source)},
          {"warnings", st.warnings},
          {"followup_transcript", std::move(followup)},
          {"session", gpfo::to_json(st.session)}};
}

inline GrowthStep step_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kStepFormat) throw std::runtime_error("not a garden step document");
  GrowthStep st;
  st.index = j.at("index").get<std::uint32_t>();
  st.prompt = j.at("prompt").get<std::string>();
  st.source = prompt_source_from_string(j.at("prompt_source").get<std::string>());
  st.warnings = j.value("warnings", std::vector<std::string>{});
  for (const auto& t : j.value("followup_transcript", nlohmann::json::array()))
    st.followup_transcript.push_back(transcript_entry_from_json(t));
  st.session = session_from_json(j.at("session"));
  st.subgraph = st.session.merged_graph;
  return st;
}

inline nlohmann::json metadata_json(const GardenSession& s) {
  return {{"format", kGardenFormat},
          {"id", s.id},
          {"seed_prompt", s.seed_prompt},
          {"mode", to_string(s.mode)},
          {"max_steps", s.max_steps},
          {"step_count", s.steps.size()},
          {"node_count", s.integrated.node_count()},
          {"edge_count", s.integrated.edge_count()}};
}

inline bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

class GardenStore {
 public:
  explicit GardenStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path dir(const std::string& id) const {
    if (!valid_session_id(id)) throw std::invalid_argument("invalid garden session id: " + id);
    return root_ / id;
  }

  bool exists(const std::string& id) const {
    return valid_session_id(id) && std::filesystem::exists(root_ / id / "session.json");
  }

  std::vector<std::string> list() const {
    std::vector<std::string> ids;
    if (!std::filesystem::exists(root_)) return ids;
    for (const auto& e : std::filesystem::directory_iterator(root_)) {
      auto id = e.path().filename().string();
      if (e.is_directory() && exists(id)) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  /// First unused id of the form garden-NNNN.
  std::string next_id() const {
    for (int n = 1;; ++n) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "garden-%04d", n);
      if (!std::filesystem::exists(root_ / buf)) return buf;
    }
  }

  static std::string step_file_name(std::uint32_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%03u.json", index);
    return buf;
  }

  /// Writes metadata, any step files not yet on disk, and the integrated graph.
  void save(const GardenSession& s) const {
    auto d = dir(s.id);
    std::filesystem::create_directories(d / "steps");
    for (const auto& st : s.steps) {
      auto p = d / "steps" / step_file_name(st.index);
      if (!std::filesystem::exists(p)) write_atomic(p, to_json(st).dump(1) + "\n");
    }
    write_atomic(d / "integrated.graphml", to_graphml(s.integrated));
    write_atomic(d / "session.json", metadata_json(s).dump(1) + "\n");
  }

  GardenSession load(const std::string& id) const {
    auto d = dir(id);
    auto meta = read_json(d / "session.json");
    if (meta.value("format", std::string{}) != kGardenFormat) throw std::runtime_error("not a garden session: " + id);
    GardenSession s;
    s.id = meta.at("id").get<std::string>();
    s.seed_prompt = meta.at("seed_prompt").get<std::string>();
    s.mode = mode_from_string(meta.at("mode").get<std::string>());
    s.max_steps = meta.at("max_steps").get<std::size_t>();
    auto count = meta.at("step_count").get<std::size_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
      s.steps.push_back(step_from_json(read_json(d / "steps" / step_file_name(i))));
      s.integrated = merge(s.integrated, s.steps.back().subgraph);
    }
    return s;
  }

 private:
  static void write_atomic(const std::filesystem::path& p, const std::string& content) {
    auto tmp = p;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      out << content;
    }
    std::filesystem::rename(tmp, p);
  }

  static nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return nlohmann::json::parse(in);
  }

  std::filesystem::path root_;
};

// Growth -------------------------------------------------------------------------

/// A gateway failure during growth; the session as of the last completed step
/// is attached (and already persisted when a store was given).
class GrowthAborted : public llm::GatewayError {
 public:
  GrowthAborted(const std::string& what, GardenSession partial)
      : llm::GatewayError(what), partial_(std::move(partial)) {}
  const GardenSession& partial() const { return partial_; }

 private:
  GardenSession partial_;
};

namespace detail {

inline void append_step(GardenSession& s, std::string prompt, PromptSource source, Followup followup,
                        const GardenConfig& cfg, llm::Gateway& gw, const GardenStore* store) {
  GrowthStep st;
  st.index = static_cast<std::uint32_t>(s.steps.size());
  st.prompt = std::move(prompt);
  st.source = source;
  st.followup_transcript = std::move(followup.transcript);
  st.warnings = std::move(followup.warnings);
  st.session = run_session(st.prompt, cfg.session, gw, StepRef{s.id, st.index});
  st.subgraph = st.session.merged_graph;
  s.integrated = merge(s.integrated, st.subgraph);
  s.steps.push_back(std::move(st));
  if (store) store->save(s);
}

}  // namespace detail

/// Creates a garden and runs its seed step.
inline GardenSession new_session(const std::string& id, const std::string& seed_prompt, Mode mode,
                                 std::size_t max_steps, const GardenConfig& cfg, llm::Gateway& gw,
                                 const GardenStore* store = nullptr) {
  if (!valid_session_id(id)) throw std::invalid_argument("invalid garden session id: " + id);
  if (text::trim_view(seed_prompt).empty()) throw std::invalid_argument("seed prompt is empty");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (store && store->exists(id)) throw std::invalid_argument("garden session already exists: " + id);
  GardenSession s;
  s.id = id;
  s.seed_prompt = seed_prompt;
  s.mode = mode;
  s.max_steps = max_steps;
  detail::append_step(s, seed_prompt, PromptSource::Seed, {}, cfg, gw, store);
  return s;
}

/// One growth step. Steered gardens take the operator's prompt; autonomous
/// gardens generate one from the integrated graph. On failure `s` is unchanged.
inline void grow_step(GardenSession& s, const std::optional<std::string>& next_prompt, const GardenConfig& cfg,
                      llm::Gateway& gw, const GardenStore* store = nullptr) {
  if (s.steps.size() >= s.max_steps) throw StepLimitReached(s.max_steps);
  if (s.mode == Mode::Steered && !next_prompt) throw std::invalid_argument("steered garden step needs a prompt");
  if (s.mode == Mode::Autonomous && next_prompt)
    throw std::invalid_argument("autonomous garden step takes no prompt");
  if (next_prompt && text::trim_view(*next_prompt).empty()) throw std::invalid_argument("step prompt is empty");
  GardenSession draft = s;
  if (next_prompt) {
    detail::append_step(draft, *next_prompt, PromptSource::Human, {}, cfg, gw, store);
  } else {
    auto f = generate_followup(draft, cfg, gw);
    auto q = f.question;
    detail::append_step(draft, q, PromptSource::Autonomous, std::move(f), cfg, gw, store);
  }
  s = std::move(draft);
}

/// Seed step plus `iterations` autonomous steps, with a summary of the result.
inline GardenSession run_autonomous(const std::string& id, const std::string& seed_prompt, int iterations,
                                    const GardenConfig& cfg, llm::Gateway& gw, const GardenStore* store = nullptr) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  GardenSession s;
  try {
    s = new_session(id, seed_prompt, Mode::Autonomous, static_cast<std::size_t>(iterations) + 1, cfg, gw, store);
    for (int i = 0; i < iterations; ++i) grow_step(s, std::nullopt, cfg, gw, store);
  } catch (const llm::GatewayError& e) {
    throw GrowthAborted(e.what(), s);
  }
  if (!s.integrated.empty()) s.summary = summarize(s.integrated);
  return s;
}

/// Every recorded gateway exchange of a garden, in call order.
inline std::vector<llm::ScriptEntry> replay_script(const GardenSession& s) {
  std::vector<llm::ScriptEntry> script;
  for (const auto& st : s.steps) {
    for (const auto& t : st.followup_transcript) script.push_back({t.request.flattened(), t.reply});
    for (auto& e : gpfo::replay_script(st.session.transcript)) script.push_back(std::move(e));
  }
  return script;
}

/// Re-runs a recorded garden against its own transcript.
inline GardenSession replay(const GardenSession& recorded, const GardenConfig& cfg) {
  if (recorded.steps.empty()) throw std::invalid_argument("nothing to replay");
  auto script = replay_script(recorded);
  if (script.empty()) throw std::invalid_argument("recorded garden has no transcript");
  llm::ScriptedMock mock(std::move(script));
  auto s = new_session(recorded.id, recorded.seed_prompt, recorded.mode, recorded.max_steps, cfg, mock);
  for (std::size_t i = 1; i < recorded.steps.size(); ++i) {
    const auto& st = recorded.steps[i];
    if (st.source == PromptSource::Human) grow_step(s, st.prompt, cfg, mock);
    else grow_step(s, std::nullopt, cfg, mock);
  }
  return s;
}

}  // namespace gpfo::garden
