#include "kgpath/rethink.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "kgpath/errors.hpp"
#include "kgpath/semantic_distiller.hpp"

namespace kgpath {

using Eigen::VectorXd;

void RethinkConfig::validate() const {
  if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || lambda1 < 0 || lambda2 < 0)
    throw ConfigError("lambda1 and lambda2 must be finite and non-negative");
  if (std::abs(lambda1 + lambda2 - 1.0) > 1e-9)
    throw ConfigError("lambda1 + lambda2 must equal 1");
  if (!std::isfinite(theta)) throw ConfigError("theta must be finite");
}

EncoderProvider::EncoderProvider(const KnowledgeGraph& kg, const WordVectorTable& wv,
                                 const structural::ReasonerParams& params, int steps)
    : kg_(kg), wv_(wv), params_(params), steps_(steps) {
  if (wv.dim() != params.word_dim)
    throw DimensionMismatch("word vectors have dimension " + std::to_string(wv.dim()) +
                            ", encoder expects " + std::to_string(params.word_dim));
  entity_embeddings_ = structural::init_entity_embeddings(kg, params);
}

VectorXd EncoderProvider::question_vec(std::string_view question) const {
  auto tokens = wv_.embed(question);
  if (tokens.cols() == 0) return VectorXd::Zero(params_.hidden_dim);
  return structural::encode_tokens(tokens, params_);
}

VectorXd EncoderProvider::path_vec_semantic(const ReasoningPath& path) const {
  return question_vec(path_to_text(path, kg_));
}

VectorXd EncoderProvider::entity_vec_structural(EntityId e) const {
  if (!kg_.valid_entity(e)) throw UnknownEntity("#" + std::to_string(e));
  return entity_embeddings_.row(e).transpose();
}

VectorXd EncoderProvider::question_vec_structural(std::string_view question) const {
  if (wv_.embed(question).cols() == 0) return VectorXd::Zero(params_.hidden_dim);
  auto enc = structural::encode_question(question, wv_, params_, steps_);
  VectorXd mean = VectorXd::Zero(params_.hidden_dim);
  for (const auto& w : enc.instructions) mean += w;
  return mean / static_cast<double>(enc.instructions.size());
}

void TableProvider::set_question(std::string question, VectorXd semantic, VectorXd structural) {
  question_sem_[question] = std::move(semantic);
  question_struct_[std::move(question)] = std::move(structural);
}

void TableProvider::set_path(std::string path_text, VectorXd v) {
  paths_[std::move(path_text)] = std::move(v);
}

void TableProvider::set_entity(EntityId e, VectorXd v) { entities_[e] = std::move(v); }

namespace {

template <typename Map, typename Key>
const VectorXd& lookup(const Map& m, const Key& key, const std::string& what) {
  auto it = m.find(key);
  if (it == m.end()) throw Error("no embedding for " + what);
  return it->second;
}

}  // namespace

VectorXd TableProvider::question_vec(std::string_view question) const {
  return lookup(question_sem_, question, "question '" + std::string(question) + "'");
}

VectorXd TableProvider::path_vec_semantic(const ReasoningPath& path) const {
  auto text = path_to_text(path, kg_);
  return lookup(paths_, text, "path '" + text + "'");
}

VectorXd TableProvider::entity_vec_structural(EntityId e) const {
  return lookup(entities_, e, "entity #" + std::to_string(e));
}

VectorXd TableProvider::question_vec_structural(std::string_view question) const {
  return lookup(question_struct_, question, "question '" + std::string(question) + "'");
}

Similarity cosine(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("cosine of vectors with " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()) + " components");
  const double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return {0.0, true};
  return {std::clamp(a.dot(b) / (na * nb), -1.0, 1.0), false};
}

Similarity semantic_score(std::string_view question, const ReasoningPath& path,
                          const EmbeddingProvider& provider) {
  return cosine(provider.question_vec(question), provider.path_vec_semantic(path));
}

Similarity structural_score(std::string_view question, const ReasoningPath& path,
                            const EmbeddingProvider& provider) {
  if (path.entities.empty()) throw Error("structural score of a path without entities");
  VectorXd mean = provider.entity_vec_structural(path.entities.front());
  for (std::size_t i = 1; i < path.entities.size(); ++i) {
    auto v = provider.entity_vec_structural(path.entities[i]);
    if (v.size() != mean.size()) throw DimensionMismatch("entity embeddings differ in size");
    mean += v;
  }
  mean /= static_cast<double>(path.entities.size());
  return cosine(provider.question_vec_structural(question), mean);
}

double combined_score(double s1, double s2, const RethinkConfig& cfg) {
  return cfg.lambda1 * s1 + cfg.lambda2 * s2;
}

bool ranks_before(const ScoredPath& a, const ScoredPath& b) {
  if (a.s != b.s) return a.s > b.s;
  if (a.path.hops() != b.path.hops()) return a.path.hops() < b.path.hops();
  if (a.text != b.text) return a.text < b.text;
  return a.path < b.path;
}

RethinkResult rethink(const KnowledgeGraph& kg, std::string_view question,
                      const PathSet& candidates, const RethinkConfig& cfg,
                      const EmbeddingProvider& provider) {
  cfg.validate();
  PathSet merged;
  for (const auto& p : candidates.paths) merged.insert(p);

  RethinkResult out;
  std::vector<ScoredPath> scored;
  for (auto& p : merged.paths) {
    ScoredPath sp;
    sp.text = path_to_text(p, kg);
    auto a = semantic_score(question, p, provider);
    auto b = structural_score(question, p, provider);
    sp.s1 = a.value;
    sp.s2 = b.value;
    sp.s = combined_score(sp.s1, sp.s2, cfg);
    sp.zero_vector = a.zero_vector || b.zero_vector;
    if (sp.zero_vector) out.warnings.push_back("zero embedding while scoring '" + sp.text + "'");
    sp.path = std::move(p);
    scored.push_back(std::move(sp));
  }
  std::sort(scored.begin(), scored.end(), ranks_before);
  for (auto& sp : scored) {
    sp.retained = sp.s > cfg.theta;
    if (sp.retained) {
      sp.rank = static_cast<int>(out.retained.size()) + 1;
      out.retained.push_back(std::move(sp));
    } else {
      out.filtered.push_back(std::move(sp));
    }
  }
  out.all_filtered = out.retained.empty() && !out.filtered.empty();
  return out;
}

RethinkResult rethink(const KnowledgeGraph& kg, std::string_view question,
                      const PathSet& semantic, const PathSet& structural,
                      const RethinkConfig& cfg, const EmbeddingProvider& provider) {
  PathSet all;
  for (const auto& p : semantic.paths) all.insert(p);
  for (const auto& p : structural.paths) all.insert(p);
  return rethink(kg, question, all, cfg, provider);
}

void write_score_report(std::ostream& out, const std::string& id, std::string_view question,
                        const RethinkResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto* group : {&result.retained, &result.filtered}) {
    for (const auto& sp : *group) {
      rows.push_back({{"path", sp.text},
                      {"source", to_string(sp.path.source)},
                      {"s1", sp.s1},
                      {"s2", sp.s2},
                      {"s", sp.s},
                      {"retained", sp.retained},
                      {"rank", sp.retained ? nlohmann::json(sp.rank) : nlohmann::json()}});
    }
  }
  nlohmann::json j = {{"id", id}, {"question", question}, {"paths", std::move(rows)}};
  out << j.dump() << '\n';
}

}  // namespace kgpath
