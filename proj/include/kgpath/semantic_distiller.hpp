#pragma once

// Shortest-path supervision for the path generator and LM-driven semantic
// path generation.

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgpath/kg_store.hpp"
#include "kgpath/lm_client.hpp"

namespace kgpath {

inline constexpr std::string_view kPathSeparator = " -> ";

// Uniform posterior over the minimal-length question->answer paths.
struct PathPosterior {
  std::vector<ReasoningPath> support;
  std::vector<double> prob;
  // Set with `reason` when the support is empty.
  bool empty = false;
  std::string reason;
  // shortest_paths hit its enumeration cap.
  bool truncated = false;
};

PathPosterior path_posterior(const KnowledgeGraph& kg, const QAInstance& inst, int max_hops);

// Grounded form "e0 -> r1 -> e1 -> ... -> en", stay hops skipped; a zero-hop
// path is the bare entity label.
std::string path_to_text(const ReasoningPath& p, const KnowledgeGraph& kg);
// Relation-only form "r1 -> r2".
std::string path_to_text(const RelationPath& p, const KnowledgeGraph& kg);

struct ParsedPath {
  RelationPath path;
  // Tokens that are neither relations nor entities. A non-empty list means
  // the path is rejected.
  std::vector<std::string> unknown;
  bool rejected() const { return !unknown.empty(); }
};

// Accepts the relation-only and the grounded form. Throws UnparsablePath when
// no token names a relation.
ParsedPath parse_path_text(std::string_view text, const KnowledgeGraph& kg);

std::string generation_prompt(std::string_view question);

struct DistillationPair {
  std::string question;
  std::string target_text;
  std::string source_instance_id;
};

struct Exclusion {
  std::string instance_id;
  std::string reason;
};

struct DistillationSet {
  std::vector<DistillationPair> pairs;
  std::vector<Exclusion> excluded;
};

// One pair per shortest path of every instance; instances without one are
// excluded.
DistillationSet build_distillation_targets(const KnowledgeGraph& kg,
                                           std::span<const QAInstance> dataset, int max_hops);

// {"prompt", "completion"} per line.
void write_distillation_jsonl(const DistillationSet& set, std::ostream& out);

// -mean over pairs of log P(target | generation prompt). Throws EmptyBatch.
double distillation_loss(std::span<const DistillationPair> pairs, LMClient& lm);

struct SemanticOptions {
  int k = 3;
  double temperature = 0.0;
  int max_tokens = 128;
  std::size_t fanout = kDefaultFanout;
};

struct SemanticPaths {
  PathSet paths;  // source = semantic
  std::vector<std::string> candidates;  // raw LM output
  int dropped = 0;
  std::vector<std::string> diagnostics;  // one line per dropped candidate
  std::string prompt;
};

// Asks the LM for k relation paths and grounds each from every question
// entity. LMUnavailable propagates.
SemanticPaths generate_semantic_paths(const QAInstance& inst, const KnowledgeGraph& kg,
                                      LMClient& lm, const SemanticOptions& opts = {});

}  // namespace kgpath
