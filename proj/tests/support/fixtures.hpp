#pragma once

// Shared test fixtures: a synthetic KG with planted two-hop rules, the
// newspaper case-study mini-KG, and a 20-question toy dataset for pipeline
// runs.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kgpath/kg_store.hpp"
#include "kgpath/rethink.hpp"
#include "kgpath/word_vectors.hpp"

namespace kgpath::testing {

struct PlantedRule {
  RelationId first;
  RelationId second;
};

struct PlantedFixture {
  KnowledgeGraph kg;
  WordVectorTable word_vectors;
  std::vector<PlantedRule> rules;
  std::vector<QAInstance> train;
  std::vector<QAInstance> test;
  // Middle entity of each planted chain, aligned with train / test.
  std::vector<EntityId> train_via;
  std::vector<EntityId> test_via;
};

struct PlantedOptions {
  int entities = 200;
  int relations = 12;
  int rules = 6;
  int train = 300;
  int test = 100;
  double background_density = 0.2;  // chance of a (head, relation) edge
  int word_dim = 50;
  std::uint64_t seed = 2024;
};

// Every relation is functional (at most one tail per head), so each question
// has exactly one answer, known by construction.
PlantedFixture make_planted_fixture(const PlantedOptions& opts = {});

// The newspaper case study: three language edges, the circulation-area edge
// and the country-language edge.
KnowledgeGraph zerkalo_kg();
inline const char* kZerkaloQuestion =
    "The newspaper Zerkalo Nedeli is circulated in an area that has what as the official "
    "language?";

// Candidates as in the case study: the circulation-area chain from the
// structural side, the three language edges from the semantic side.
struct ZerkaloCandidates {
  PathSet semantic;
  PathSet structural;
};
ZerkaloCandidates zerkalo_candidates(const KnowledgeGraph& kg);
// Vectors chosen so the chain scores highest, then Ukrainian, Russian and
// English. Entity vectors are all equal, so only the semantic side differs.
void install_zerkalo_vectors(TableProvider& provider, const KnowledgeGraph& kg);
QAInstance zerkalo_instance(const KnowledgeGraph& kg);

// 20 one- and two-hop questions over a small geography graph, with word
// vectors covering the question and relation vocabulary.
struct ToyFixture {
  KnowledgeGraph kg;
  WordVectorTable word_vectors;
  std::vector<QAInstance> questions;
  std::string triples_tsv;
  std::string dataset_jsonl;
  std::string word_vectors_txt;
};
ToyFixture make_toy_fixture();

// Scripted LM for the toy questions: each generation prompt gets relation
// paths (one of them unusable), each reasoning prompt gets the gold answer.
std::string toy_mock_script();
// Config with paths relative to its own directory.
std::string toy_config();
// Writes triples.tsv, dataset.jsonl, word_vectors.txt, mock_lm.json and
// config.json into `dir`.
void write_toy_workspace(const std::filesystem::path& dir);

}  // namespace kgpath::testing
