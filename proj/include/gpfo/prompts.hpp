#pragma once

// The four prompt templates and their single-pass placeholder substitution.

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gpfo::prompts {

class EmptyAnswers : public std::invalid_argument {
 public:
  EmptyAnswers() : std::invalid_argument("integration prompt needs at least one answer") {}
};

inline constexpr std::string_view kCritique =
    "I will show you a question and a thought process. \n"
    "\n"
    "Your task is to critique the thought process and provide suggestions to improve it to better answer the "
    "question in a logical, well-reasoned manner.\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Thought process: {think}\n"
    "\n"
    "Provide feedback and suggestions for how to improve the thought process, and nothing else. The feedback is:";

inline constexpr std::string_view kImprovement =
    "I will show you a thought process and feedback. Carefully implement the feedback and improve the thought "
    "process by addressing all suggestions, but keep the overall structure the same.\n"
    "\n"
    "Thought process: {think}\n"
    "\n"
    "Feedback: {reflect}\n"
    "\n"
    "Provide the improved thought process, and nothing else. The revised thought process is:";

// {answers} expands to one "ANSWER #k: ..." line per answer.
inline constexpr std::string_view kIntegration =
    "I will show you a question and several possible answers. \n"
    "\n"
    "QUESTION: {question}\n"
    "\n"
    "{answers}\n"
    "\n"
    "Carefully incorporate all ideas presented in the answer candidates into a very detailed, final answer. \n"
    "\n"
    "Do not repeat the question. You directly begin your response with the final answer to the question. \n"
    "\n"
    "The answer is:";

inline constexpr std::string_view kFollowup =
    "Consider this list of topics/keywords. \n"
    "\n"
    "Formulate a concise follow-up creative and highly unusual question to ask about a related but totally "
    "different concept. \n"
    "\n"
    "Your question should include at least one of the original topics/keywords marked as '...' but expand to new "
    "dissimilar fields such as philosophy or art.\n"
    "\n"
    "Original list of topics/keywords:\n"
    "\n"
    "{graph_str}\n"
    "\n"
    "The new question is:";

/// Replaces each `{name}` whose name is a key of `values`; other braces are
/// copied. Substituted text is never rescanned.
inline std::string fill(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(tmpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

inline std::string build_critique_prompt(std::string_view question, std::string_view think) {
  return fill(kCritique, {{"question", std::string(question)}, {"think", std::string(think)}});
}

inline std::string build_improvement_prompt(std::string_view think, std::string_view reflect) {
  return fill(kImprovement, {{"think", std::string(think)}, {"reflect", std::string(reflect)}});
}

inline std::string build_integration_prompt(std::string_view question, const std::vector<std::string>& answers) {
  if (answers.empty()) throw EmptyAnswers();
  std::string lines;
  for (std::size_t k = 0; k < answers.size(); ++k) {
    if (k) lines += '\n';
    lines += "ANSWER #" + std::to_string(k) + ": " + answers[k];
  }
  return fill(kIntegration, {{"question", std::string(question)}, {"answers", lines}});
}

inline std::string build_followup_prompt(std::string_view graph_str, std::string_view tmpl = kFollowup) {
  if (graph_str.empty()) throw std::invalid_argument("follow-up prompt needs a non-empty topic list");
  return fill(tmpl, {{"graph_str", std::string(graph_str)}});
}

}  // namespace gpfo::prompts
