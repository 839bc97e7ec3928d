#pragma once

// End-to-end question answering: semantic and structural path generation,
// rethinking, LM answering, scoring, and threshold / weight sweeps.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgpath/kg_store.hpp"
#include "kgpath/lm_client.hpp"
#include "kgpath/rethink.hpp"
#include "kgpath/semantic_distiller.hpp"
#include "kgpath/structural_reasoner.hpp"
#include "kgpath/word_vectors.hpp"

namespace kgpath {

// Reads JSON lines with keys id, question, question_entities, answers and
// optional answer_entities. Names that do not resolve against the KG are kept
// in `unresolved`; the instance stays. Throws MalformedRecord(line).
std::vector<QAInstance> read_dataset(std::istream& in, const KnowledgeGraph& kg);
std::vector<QAInstance> load_dataset(const std::string& path, const KnowledgeGraph& kg);

struct LMSpec {
  std::string kind = "mock";  // mock | http
  std::string script;         // mock script path
  HttpLMOptions http;
  // Sampling temperature for semantic path generation; negative means the
  // per-kind default (0 for mock, 0.7 for http).
  double semantic_temperature = -1;
  int max_tokens = 256;

  double effective_semantic_temperature() const;
};

std::unique_ptr<LMClient> make_lm_client(const LMSpec& spec);

struct PipelineConfig {
  std::string kg_path;
  std::string dataset_path;
  std::string word_vectors_path;
  std::string train_dataset_path;  // defaults to dataset_path
  std::string checkpoint_path;     // loaded when set; trained otherwise
  structural::TrainConfig train;
  RethinkConfig rethink;
  int beam = 5;
  int k = 3;
  int max_hops = 4;
  LMSpec lm;
  std::string output_dir = "out";
  std::uint64_t seed = 7;
  int workers = 1;

  // Relative paths are resolved against `base`. Unknown keys are rejected.
  static PipelineConfig from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base = {});
  nlohmann::json to_json() const;
  // Throws ConfigError for missing files and out-of-range values.
  void validate() const;
};

// Reads a JSON config file; relative paths resolve against its directory.
PipelineConfig load_config(const std::string& path);

struct Resources {
  KnowledgeGraph kg;
  WordVectorTable word_vectors;
  std::vector<QAInstance> dataset;
  structural::ReasonerParams params;
  std::string structural_source;  // "checkpoint" or "trained"
  std::vector<double> epoch_loss;
};

// Loads KG, dataset and word vectors, then loads or trains the structural
// reasoner (seeded from cfg.seed).
Resources load_resources(const PipelineConfig& cfg, std::ostream* log = nullptr);

struct QuestionRecord {
  std::string id;
  std::string question;
  std::vector<std::string> gold;
  std::vector<std::string> predictions;
  int hit = 0;
  double f1 = 0;
  bool parse_failure = false;
  bool fallback = false;  // no path survived, the marker prompt was used
  bool unlinked = false;
  int semantic_paths = 0;
  int structural_paths = 0;
  int candidates = 0;
  int retained = 0;
  int semantic_dropped = 0;
  std::vector<std::string> errors;
  std::string generation_prompt;
  std::string reasoning_prompt;
  std::string raw_output;
  RethinkResult ranking;
};

struct EvalReport {
  std::vector<QuestionRecord> records;
  double hits_at_1 = 0;
  double f1 = 0;
  double retained_mean = 0;
  int unlinked = 0;
  int parse_failures = 0;
  int fallbacks = 0;
  int errors = 0;

  // Recomputes the aggregates from the records.
  void aggregate();
  nlohmann::json to_json() const;
  std::string table() const;
};

// Runs every question of `res.dataset`. Per-question failures are recorded
// and the run continues.
EvalReport evaluate(const PipelineConfig& cfg, const Resources& res, LMClient& lm);

// evaluate() plus artifacts under cfg.output_dir: report.json, report.txt,
// scores.jsonl and manifest.json.
EvalReport run_pipeline(const PipelineConfig& cfg, const Resources& res, LMClient& lm);
EvalReport run_pipeline(const PipelineConfig& cfg, LMClient& lm, std::ostream* log = nullptr);

void write_report(const EvalReport& report, const PipelineConfig& cfg, const Resources& res,
                  const std::filesystem::path& dir);

struct SweepRow {
  double value = 0;
  double hits_at_1 = 0;
  double f1 = 0;
  double retained_mean = 0;
  std::string error;  // empty when the cell succeeded
};

// One evaluation per value of "theta" or "lambda1" (lambda2 = 1 - lambda1),
// everything else fixed. Values must be sorted ascending. Each cell's report
// goes to <output_dir>/sweep/<parameter>=<value>/.
std::vector<SweepRow> sweep(const PipelineConfig& cfg, const Resources& res, LMClient& lm,
                            const std::string& parameter, const std::vector<double>& values);

// Header: value,hits_at_1,f1,retained_mean
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);
std::string sweep_table(const std::string& parameter, const std::vector<SweepRow>& rows);

// Path (de)serialization by name, used by the CLI's intermediate files.
nlohmann::json path_to_json(const ReasoningPath& p, const KnowledgeGraph& kg);
ReasoningPath path_from_json(const nlohmann::json& j, const KnowledgeGraph& kg);

// Semantic and structural candidates for one question.
struct Candidates {
  SemanticPaths semantic;
  PathSet structural;
  std::vector<std::string> errors;
};
Candidates generate_candidates(const QAInstance& inst, const PipelineConfig& cfg,
                               const Resources& res, LMClient& lm);

}  // namespace kgpath
