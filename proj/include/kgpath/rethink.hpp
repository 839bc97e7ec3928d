#pragma once

// Path rescoring: cosine of the question against each candidate path in a
// semantic space and a structural space, mixed linearly, filtered by a
// threshold and sorted.

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kgpath/kg_store.hpp"
#include "kgpath/structural_reasoner.hpp"
#include "kgpath/word_vectors.hpp"

namespace kgpath {

struct RethinkConfig {
  double lambda1 = 0.5;  // semantic weight
  double lambda2 = 0.5;  // structural weight
  double theta = 0.6;

  // Throws ConfigError unless the weights are non-negative, sum to 1 within
  // 1e-9 and theta is finite.
  void validate() const;
};

// Deterministic, and safe for concurrent calls once constructed.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Eigen::VectorXd question_vec(std::string_view question) const = 0;
  virtual Eigen::VectorXd path_vec_semantic(const ReasoningPath& path) const = 0;
  virtual Eigen::VectorXd entity_vec_structural(EntityId e) const = 0;
  virtual Eigen::VectorXd question_vec_structural(std::string_view question) const = 0;
};

// Default provider built on a trained structural reasoner. The semantic side
// runs the question encoder over the question and over the path text; the
// structural side compares initial entity embeddings against the mean of the
// question's instruction vectors. Text with no tokens maps to a zero vector.
class EncoderProvider : public EmbeddingProvider {
 public:
  EncoderProvider(const KnowledgeGraph& kg, const WordVectorTable& wv,
                  const structural::ReasonerParams& params, int steps);

  Eigen::VectorXd question_vec(std::string_view question) const override;
  Eigen::VectorXd path_vec_semantic(const ReasoningPath& path) const override;
  Eigen::VectorXd entity_vec_structural(EntityId e) const override;
  Eigen::VectorXd question_vec_structural(std::string_view question) const override;

 private:
  const KnowledgeGraph& kg_;
  const WordVectorTable& wv_;
  const structural::ReasonerParams& params_;
  int steps_;
  Eigen::MatrixXd entity_embeddings_;
};

// Fixed vectors for tests and hand-built fixtures. Paths are keyed by their
// grounded text. Throws Error for a missing key.
class TableProvider : public EmbeddingProvider {
 public:
  explicit TableProvider(const KnowledgeGraph& kg) : kg_(kg) {}

  void set_question(std::string question, Eigen::VectorXd semantic, Eigen::VectorXd structural);
  void set_path(std::string path_text, Eigen::VectorXd v);
  void set_entity(EntityId e, Eigen::VectorXd v);

  Eigen::VectorXd question_vec(std::string_view question) const override;
  Eigen::VectorXd path_vec_semantic(const ReasoningPath& path) const override;
  Eigen::VectorXd entity_vec_structural(EntityId e) const override;
  Eigen::VectorXd question_vec_structural(std::string_view question) const override;

 private:
  const KnowledgeGraph& kg_;
  std::map<std::string, Eigen::VectorXd, std::less<>> question_sem_;
  std::map<std::string, Eigen::VectorXd, std::less<>> question_struct_;
  std::map<std::string, Eigen::VectorXd, std::less<>> paths_;
  std::map<EntityId, Eigen::VectorXd> entities_;
};

struct Similarity {
  double value = 0;
  bool zero_vector = false;  // one side was all zeros; value is 0
};

// Clamped to [-1, 1]. Throws DimensionMismatch.
Similarity cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

Similarity semantic_score(std::string_view question, const ReasoningPath& path,
                          const EmbeddingProvider& provider);
// Against the mean embedding of the path's entities.
Similarity structural_score(std::string_view question, const ReasoningPath& path,
                            const EmbeddingProvider& provider);
double combined_score(double s1, double s2, const RethinkConfig& cfg);

struct ScoredPath {
  ReasoningPath path;
  std::string text;
  double s1 = 0;
  double s2 = 0;
  double s = 0;
  bool retained = false;
  int rank = 0;  // 1-based among retained paths, 0 when filtered
  bool zero_vector = false;
};

struct RethinkResult {
  std::vector<ScoredPath> retained;  // rank order
  std::vector<ScoredPath> filtered;  // same ordering rule
  bool all_filtered = false;          // candidates existed but none survived
  std::vector<std::string> warnings;
};

// Total order: s descending, then hop count, then path text.
bool ranks_before(const ScoredPath& a, const ScoredPath& b);

// Scores every candidate, keeps those with s > theta and sorts them.
RethinkResult rethink(const KnowledgeGraph& kg, std::string_view question,
                      const PathSet& candidates, const RethinkConfig& cfg,
                      const EmbeddingProvider& provider);
// Merges the two sets first; a path found by both keeps both provenance bits.
RethinkResult rethink(const KnowledgeGraph& kg, std::string_view question,
                      const PathSet& semantic, const PathSet& structural,
                      const RethinkConfig& cfg, const EmbeddingProvider& provider);

// One JSON line: {"id", "question", "paths": [{path, source, s1, s2, s,
// retained, rank}]} with retained paths first.
void write_score_report(std::ostream& out, const std::string& id, std::string_view question,
                        const RethinkResult& result);

}  // namespace kgpath
