// kgpath command-line front end. Every subcommand reads the same JSON config
// and writes its artifacts under the output directory.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "kgpath/answer_reasoner.hpp"
#include "kgpath/checkpoint.hpp"
#include "kgpath/errors.hpp"
#include "kgpath/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kgpath;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::string lm;
  std::string checkpoint;
};

PipelineConfig resolve_config(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required for this command");
  auto cfg = load_config(g.config);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.train.seed = *g.seed;
  }
  if (!g.output_dir.empty()) cfg.output_dir = g.output_dir;
  if (!g.lm.empty()) cfg.lm.kind = g.lm;
  if (!g.checkpoint.empty()) cfg.checkpoint_path = g.checkpoint;
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw MalformedRecord(n, "not JSON in " + p.string());
    out.push_back(std::move(j));
  }
  return out;
}

std::map<std::string, const QAInstance*> by_id(const std::vector<QAInstance>& data) {
  std::map<std::string, const QAInstance*> out;
  for (const auto& q : data) out[q.id] = &q;
  return out;
}

int cmd_ingest(const Globals& g, const std::string& triples, const std::string& dataset) {
  std::string kg_path = triples, data_path = dataset;
  fs::path out_dir = g.output_dir.empty() ? fs::path("out") : fs::path(g.output_dir);
  if (!g.config.empty()) {
    auto cfg = resolve_config(g);
    if (kg_path.empty()) kg_path = cfg.kg_path;
    if (data_path.empty()) data_path = cfg.dataset_path;
    out_dir = cfg.output_dir;
  }
  if (kg_path.empty()) throw ConfigError("ingest needs --triples or --config");
  auto kg = load_triples(kg_path);
  std::cout << "entities " << kg.num_entities() << "\nrelations " << kg.num_relations()
            << "\ntriples " << kg.num_triples() << '\n';
  {
    auto out = open_out(out_dir / "kg.tsv");
    write_triples(kg, out);
  }
  if (!data_path.empty()) {
    auto data = load_dataset(data_path, kg);
    std::size_t flagged = 0, unlinked = 0;
    auto out = open_out(out_dir / "dataset_report.jsonl");
    for (const auto& q : data) {
      flagged += !q.unresolved.empty();
      unlinked += !q.linked();
      out << json{{"id", q.id}, {"linked", q.linked()}, {"unresolved", q.unresolved}}.dump()
          << '\n';
    }
    std::cout << "questions " << data.size() << "\nwith unresolved names " << flagged
              << "\nunlinked " << unlinked << '\n';
  }
  std::cout << "wrote " << (out_dir / "kg.tsv").string() << '\n';
  return 0;
}

int cmd_train(const Globals& g, std::string out_path) {
  auto cfg = resolve_config(g);
  cfg.checkpoint_path.clear();
  if (out_path.empty()) out_path = (fs::path(cfg.output_dir) / "structural.ckpt").string();
  auto res = load_resources(cfg, &std::cout);
  CheckpointMeta meta;
  meta.train = cfg.train;
  meta.entity_vocab_hash = vocabulary_hash(res.kg.entities().names());
  meta.relation_vocab_hash = vocabulary_hash(res.kg.relations().names());
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out_path).parent_path());
  save_checkpoint(out_path, res.params, meta);
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

int cmd_distill(const Globals& g, bool with_loss) {
  auto cfg = resolve_config(g);
  auto kg = load_triples(cfg.kg_path);
  auto data = load_dataset(cfg.dataset_path, kg);
  auto set = build_distillation_targets(kg, data, cfg.max_hops);
  fs::path dir = cfg.output_dir;
  {
    auto out = open_out(dir / "distill.jsonl");
    write_distillation_jsonl(set, out);
  }
  {
    auto out = open_out(dir / "distill_excluded.jsonl");
    for (const auto& e : set.excluded)
      out << json{{"id", e.instance_id}, {"reason", e.reason}}.dump() << '\n';
  }
  std::cout << "pairs " << set.pairs.size() << "\nexcluded " << set.excluded.size() << '\n';
  if (with_loss && !set.pairs.empty()) {
    auto lm = make_lm_client(cfg.lm);
    std::cout << "distillation loss " << distillation_loss(set.pairs, *lm) << '\n';
  }
  return 0;
}

int cmd_generate(const Globals& g) {
  auto cfg = resolve_config(g);
  auto res = load_resources(cfg, &std::cerr);
  auto lm = make_lm_client(cfg.lm);
  auto out = open_out(fs::path(cfg.output_dir) / "paths.jsonl");
  for (const auto& inst : res.dataset) {
    auto c = generate_candidates(inst, cfg, res, *lm);
    json sem = json::array(), st = json::array();
    for (const auto& p : c.semantic.paths.paths) sem.push_back(path_to_json(p, res.kg));
    for (const auto& p : c.structural.paths) st.push_back(path_to_json(p, res.kg));
    out << json{{"id", inst.id},
                {"question", inst.question},
                {"semantic", sem},
                {"structural", st},
                {"semantic_dropped", c.semantic.dropped},
                {"diagnostics", c.semantic.diagnostics},
                {"errors", c.errors}}
               .dump()
        << '\n';
    std::cout << inst.id << ": " << sem.size() << " semantic, " << st.size() << " structural\n";
  }
  return 0;
}

int cmd_rethink(const Globals& g, std::string paths_file) {
  auto cfg = resolve_config(g);
  auto res = load_resources(cfg, &std::cerr);
  if (paths_file.empty()) paths_file = (fs::path(cfg.output_dir) / "paths.jsonl").string();
  EncoderProvider provider(res.kg, res.word_vectors, res.params, cfg.train.steps);
  auto ranked = open_out(fs::path(cfg.output_dir) / "ranked.jsonl");
  auto scores = open_out(fs::path(cfg.output_dir) / "scores.jsonl");
  for (const auto& row : read_jsonl(paths_file)) {
    PathSet sem, st;
    for (const auto& p : row.at("semantic")) sem.insert(path_from_json(p, res.kg));
    for (const auto& p : row.at("structural")) st.insert(path_from_json(p, res.kg));
    auto question = row.at("question").get<std::string>();
    auto id = row.at("id").get<std::string>();
    auto result = rethink(res.kg, question, sem, st, cfg.rethink, provider);
    json kept = json::array();
    for (const auto& sp : result.retained) {
      auto pj = path_to_json(sp.path, res.kg);
      pj["text"] = sp.text;
      pj["s1"] = sp.s1;
      pj["s2"] = sp.s2;
      pj["s"] = sp.s;
      pj["rank"] = sp.rank;
      kept.push_back(std::move(pj));
    }
    ranked << json{{"id", id}, {"question", question}, {"retained", kept}}.dump() << '\n';
    write_score_report(scores, id, question, result);
    std::cout << id << ": kept " << result.retained.size() << " of "
              << result.retained.size() + result.filtered.size() << '\n';
  }
  return 0;
}

int cmd_answer(const Globals& g, std::string ranked_file) {
  auto cfg = resolve_config(g);
  auto kg = load_triples(cfg.kg_path);
  auto data = load_dataset(cfg.dataset_path, kg);
  auto index = by_id(data);
  auto lm = make_lm_client(cfg.lm);
  if (ranked_file.empty()) ranked_file = (fs::path(cfg.output_dir) / "ranked.jsonl").string();
  auto out = open_out(fs::path(cfg.output_dir) / "answers.jsonl");
  for (const auto& row : read_jsonl(ranked_file)) {
    auto id = row.at("id").get<std::string>();
    auto it = index.find(id);
    if (it == index.end()) throw Error("ranked file mentions unknown question id " + id);
    std::vector<ScoredPath> ordered;
    for (const auto& p : row.at("retained")) {
      ScoredPath sp;
      sp.path = path_from_json(p, kg);
      sp.s = p.value("s", 0.0);
      sp.rank = p.value("rank", 0);
      sp.retained = true;
      ordered.push_back(std::move(sp));
    }
    auto ans = answer(*it->second, ordered, kg, *lm);
    out << json{{"id", id},
                {"predictions", ans.answers},
                {"parse_failure", ans.parse_failure},
                {"raw", ans.raw},
                {"prompt", ans.prompt}}
               .dump()
        << '\n';
    std::cout << id << ": " << (ans.answers.empty() ? "(none)" : ans.answers.front()) << '\n';
  }
  return 0;
}

int cmd_evaluate(const Globals& g) {
  auto cfg = resolve_config(g);
  auto res = load_resources(cfg, &std::cerr);
  auto lm = make_lm_client(cfg.lm);
  auto report = run_pipeline(cfg, res, *lm);
  std::cout << report.table();
  std::cout << "wrote " << (fs::path(cfg.output_dir) / "report.json").string() << '\n';
  return 0;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad sweep value '" + item + "'");
    }
  }
  return out;
}

int cmd_sweep(const Globals& g, const std::string& param, const std::string& values) {
  auto cfg = resolve_config(g);
  auto res = load_resources(cfg, &std::cerr);
  auto lm = make_lm_client(cfg.lm);
  auto rows = sweep(cfg, res, *lm, param, parse_values(values));
  auto csv_path = fs::path(cfg.output_dir) / ("sweep_" + param + ".csv");
  {
    auto out = open_out(csv_path);
    write_sweep_csv(rows, out);
  }
  std::cout << sweep_table(param, rows) << "wrote " << csv_path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reasoning-path retrieval, ranking and answering over a knowledge graph"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON pipeline config");
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--output-dir", g.output_dir, "Override the output directory");
  app.add_option("--lm", g.lm, "Language-model client")->check(CLI::IsMember({"mock", "http"}));
  app.add_option("--checkpoint", g.checkpoint, "Structural checkpoint to load");

  std::string triples, dataset;
  auto* ingest = app.add_subcommand("ingest", "Validate and normalize a triple file and dataset");
  ingest->add_option("--triples", triples, "TAB-separated triple file");
  ingest->add_option("--dataset", dataset, "JSON-lines QA dataset");

  std::string ckpt_out;
  auto* train = app.add_subcommand("train-structural", "Train the structural reasoner");
  train->add_option("--out", ckpt_out, "Checkpoint path (default <output-dir>/structural.ckpt)");

  bool with_loss = false;
  auto* distill = app.add_subcommand("build-distill", "Write shortest-path distillation pairs");
  distill->add_flag("--loss", with_loss, "Also report the distillation loss under the LM");

  auto* generate = app.add_subcommand("generate-paths", "Semantic and structural candidates");

  std::string paths_file;
  auto* rethink_cmd = app.add_subcommand("rethink", "Score, filter and rank candidate paths");
  rethink_cmd->add_option("--paths", paths_file, "Candidates (default <output-dir>/paths.jsonl)");

  std::string ranked_file;
  auto* answer_cmd = app.add_subcommand("answer", "Ask the LM using ranked paths");
  answer_cmd->add_option("--ranked", ranked_file, "Ranked paths (default <output-dir>/ranked.jsonl)");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Run the whole pipeline and score it");

  std::string param = "theta", values;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate across theta or lambda1 values");
  sweep_cmd->add_option("--param", param, "theta or lambda1")
      ->check(CLI::IsMember({"theta", "lambda1"}));
  sweep_cmd->add_option("--values", values, "Comma-separated ascending values")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(g, triples, dataset);
    if (*train) return cmd_train(g, ckpt_out);
    if (*distill) return cmd_distill(g, with_loss);
    if (*generate) return cmd_generate(g);
    if (*rethink_cmd) return cmd_rethink(g, paths_file);
    if (*answer_cmd) return cmd_answer(g, ranked_file);
    if (*evaluate_cmd) return cmd_evaluate(g);
    if (*sweep_cmd) return cmd_sweep(g, param, values);
  } catch (const kgpath::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
