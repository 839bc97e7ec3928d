#pragma once

// Final answering: ranked paths plus question in, answer list out.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgpath/kg_store.hpp"
#include "kgpath/lm_client.hpp"
#include "kgpath/rethink.hpp"

namespace kgpath {

inline constexpr std::string_view kNoPathsMarker = "(no reasoning paths retrieved)";

struct PromptBundle {
  std::string text;
  int path_count = 0;
  std::string question_id;
};

// Lines are placed verbatim, in order; an empty list yields the marker line.
std::string render_reasoning_prompt(std::string_view question,
                                    std::span<const std::string> path_lines);

PromptBundle build_reasoning_prompt(const QAInstance& inst, std::span<const ScoredPath> ordered,
                                    const KnowledgeGraph& kg);

struct AnswerSet {
  std::vector<std::string> answers;  // first = top-1
  std::string raw;
  bool parse_failure = false;
  std::string prompt;
};

// JSON array, then a bracketed list, then one answer per line after an
// "answer" cue. Never throws.
AnswerSet parse_answers(std::string_view raw);

// Single completion at temperature 0 by default. LMUnavailable propagates.
AnswerSet answer(const QAInstance& inst, std::span<const ScoredPath> ordered,
                 const KnowledgeGraph& kg, LMClient& lm, double temperature = 0.0);

}  // namespace kgpath
