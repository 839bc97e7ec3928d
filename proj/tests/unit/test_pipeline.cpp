#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "fixtures.hpp"
#include "golden.hpp"
#include "kgpath/checkpoint.hpp"
#include "kgpath/errors.hpp"
#include "kgpath/pipeline.hpp"

using namespace kgpath;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("kgpath_unit_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Trained once and shared by the cases below.
struct ToyRun {
  fs::path dir;
  PipelineConfig cfg;
  Resources res;

  static ToyRun& get() {
    static ToyRun run = [] {
      ToyRun r;
      r.dir = scratch_dir("toy");
      testing::write_toy_workspace(r.dir);
      r.cfg = load_config((r.dir / "config.json").string());
      r.res = load_resources(r.cfg);
      return r;
    }();
    return run;
  }
};

}  // namespace

TEST_CASE("dataset loading") {
  auto kg = testing::zerkalo_kg();
  std::istringstream two(
      R"({"id":"a","question":"q1","question_entities":["Zerkalo Nedeli"],"answers":["Ukrainian Language"]})"
      "\n\n"
      R"({"id":"b","question":"q2","question_entities":["Nowhere"],"answers":["Ukraine"]})"
      "\n");
  auto data = read_dataset(two, kg);
  REQUIRE(data.size() == 2);
  CHECK(data[0].linked());
  CHECK(data[0].answer_entities == std::vector<EntityId>{kg.entity_id("Ukrainian Language")});
  CHECK_FALSE(data[1].linked());
  CHECK(data[1].unresolved == std::vector<std::string>{"Nowhere"});

  std::istringstream missing(R"({"id":"a","question":"q","question_entities":[]})");
  try {
    read_dataset(missing, kg);
    FAIL("expected MalformedRecord");
  } catch (const MalformedRecord& e) {
    CHECK(e.line() == 1);
  }
  std::istringstream junk("{\"id\":\"a\"\nnot json\n");
  CHECK_THROWS_AS(read_dataset(junk, kg), MalformedRecord);
}

TEST_CASE("config parsing") {
  auto dir = scratch_dir("config");
  testing::write_toy_workspace(dir);
  auto cfg = load_config((dir / "config.json").string());
  CHECK(cfg.kg_path == (dir / "triples.tsv").lexically_normal().string());
  CHECK(cfg.lm.script == (dir / "mock_lm.json").lexically_normal().string());
  CHECK(cfg.train.epochs == 80);
  CHECK(cfg.train.batch_size == 40);
  CHECK(cfg.train.learning_rate == 4e-4);
  CHECK(cfg.rethink.theta == 0.3);
  CHECK(cfg.lm.effective_semantic_temperature() == 0.0);
  CHECK_NOTHROW(cfg.validate());

  auto j = nlohmann::json::parse(testing::toy_config());
  auto bad = j;
  bad["surprise"] = 1;
  CHECK_THROWS_AS(PipelineConfig::from_json(bad, dir), ConfigError);
  bad = j;
  bad["rethink"]["lambda1"] = 0.9;
  CHECK_THROWS_AS(PipelineConfig::from_json(bad, dir).validate(), ConfigError);
  bad = j;
  bad["kg_path"] = "missing.tsv";
  CHECK_THROWS_AS(PipelineConfig::from_json(bad, dir).validate(), ConfigError);
  bad = j;
  bad["structural"]["epochs"] = 0;
  CHECK_THROWS_AS(PipelineConfig::from_json(bad, dir).validate(), ConfigError);
  bad = j;
  bad.erase("dataset_path");
  CHECK_THROWS_AS(PipelineConfig::from_json(bad, dir), ConfigError);
  CHECK_THROWS_AS(load_config((dir / "nope.json").string()), ConfigError);

  auto round = PipelineConfig::from_json(cfg.to_json());
  CHECK(round.to_json() == cfg.to_json());
}

TEST_CASE("toy pipeline answers every question and is reproducible") {
  auto& run = ToyRun::get();
  CHECK(run.res.structural_source == "trained");
  CHECK(run.res.epoch_loss.size() == 80);

  auto cfg = run.cfg;
  cfg.output_dir = (run.dir / "run_a").string();
  auto lm = make_lm_client(cfg.lm);
  auto a = run_pipeline(cfg, run.res, *lm);
  CHECK(a.records.size() == 20);
  CHECK(a.hits_at_1 == 1.0);
  CHECK(a.f1 == 1.0);
  CHECK(a.errors == 0);
  CHECK(a.parse_failures == 0);

  const auto& first = a.records.front();
  CHECK(first.id == "toy-0");
  CHECK(first.generation_prompt == read_golden("generation_toy.txt"));
  CHECK(first.semantic_dropped == 1);
  CHECK(first.reasoning_prompt.find("France -> location.country.capital -> Paris") !=
        std::string::npos);

  auto cfg_b = cfg;
  cfg_b.output_dir = (run.dir / "run_b").string();
  auto lm_b = make_lm_client(cfg_b.lm);
  run_pipeline(cfg_b, run.res, *lm_b);
  for (const char* f : {"report.json", "report.txt", "scores.jsonl"})
    CHECK(slurp(run.dir / "run_a" / f) == slurp(run.dir / "run_b" / f));
  auto manifest = nlohmann::json::parse(slurp(run.dir / "run_a" / "manifest.json"));
  CHECK(manifest["structural_source"] == "trained");
  CHECK(manifest.contains("config_hash"));
}

TEST_CASE("a threshold above every score falls back to the marker prompt") {
  auto& run = ToyRun::get();
  auto cfg = run.cfg;
  cfg.rethink.theta = 1.5;
  cfg.output_dir = (run.dir / "fallback").string();
  auto lm = make_lm_client(cfg.lm);
  auto r = evaluate(cfg, run.res, *lm);
  CHECK(r.fallbacks == 20);
  CHECK(r.retained_mean == 0.0);
  CHECK(r.records.front().reasoning_prompt == read_golden("reasoning_empty.txt"));
  // The scripted model still answers.
  CHECK(r.hits_at_1 == 1.0);
}

TEST_CASE("parallel evaluation matches the serial one") {
  auto& run = ToyRun::get();
  auto cfg = run.cfg;
  auto lm = make_lm_client(cfg.lm);
  auto serial = evaluate(cfg, run.res, *lm);
  cfg.workers = 3;
  auto parallel = evaluate(cfg, run.res, *lm);
  CHECK(serial.to_json() == parallel.to_json());
}

TEST_CASE("threshold sweep") {
  auto& run = ToyRun::get();
  auto cfg = run.cfg;
  cfg.output_dir = (run.dir / "sweep_out").string();
  auto lm = make_lm_client(cfg.lm);
  std::vector<double> values{-1.0, 0.0, 0.3, 0.6, 0.9};
  auto rows = sweep(cfg, run.res, *lm, "theta", values);
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].retained_mean <= rows[i - 1].retained_mean);
  for (const auto& r : rows) CHECK(r.error.empty());
  std::ostringstream csv;
  write_sweep_csv(rows, csv);
  CHECK(csv.str().rfind("value,hits_at_1,f1,retained_mean\n", 0) == 0);
  CHECK(fs::exists(fs::path(cfg.output_dir) / "sweep"));

  CHECK_THROWS_AS(sweep(cfg, run.res, *lm, "theta", {0.5, 0.1}), ConfigError);
  CHECK_THROWS_AS(sweep(cfg, run.res, *lm, "beam", {1}), ConfigError);
  auto lam = sweep(cfg, run.res, *lm, "lambda1", {0.0, 1.0});
  CHECK(lam.size() == 2);
}

TEST_CASE("checkpoints reload into identical runs") {
  auto& run = ToyRun::get();
  auto ck = run.dir / "toy.ckpt";
  CheckpointMeta meta;
  meta.train = run.cfg.train;
  meta.entity_vocab_hash = vocabulary_hash(run.res.kg.entities().names());
  meta.relation_vocab_hash = vocabulary_hash(run.res.kg.relations().names());
  save_checkpoint(ck.string(), run.res.params, meta);
  auto cfg = run.cfg;
  cfg.checkpoint_path = ck.string();
  auto res = load_resources(cfg);
  CHECK(res.structural_source == "checkpoint");
  auto lm = make_lm_client(cfg.lm);
  CHECK(evaluate(cfg, res, *lm).hits_at_1 == 1.0);
}

TEST_CASE("path records round trip by name") {
  auto kg = testing::zerkalo_kg();
  auto c = testing::zerkalo_candidates(kg);
  const auto& p = c.structural.paths.front();
  auto back = path_from_json(path_to_json(p, kg), kg);
  CHECK(back.same_as(p));
  CHECK(back.source == p.source);
  auto j = path_to_json(p, kg);
  j["entities"][1] = "Russian Language";
  CHECK_THROWS_AS(path_from_json(j, kg), Error);
}

TEST_CASE("committed toy workspace matches the fixture generator") {
  auto dir = scratch_dir("toy_sync");
  testing::write_toy_workspace(dir);
  const fs::path committed = fs::path(KGPATH_DATA_DIR) / "toy";
  for (const char* f : {"triples.tsv", "dataset.jsonl", "word_vectors.txt", "mock_lm.json",
                        "config.json"})
    CHECK_MESSAGE(slurp(dir / f) == slurp(committed / f), f);
}
