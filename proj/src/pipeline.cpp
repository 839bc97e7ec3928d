#include "kgpath/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "kgpath/answer_reasoner.hpp"
#include "kgpath/checkpoint.hpp"
#include "kgpath/errors.hpp"
#include "kgpath/metrics.hpp"

namespace kgpath {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset

namespace {

std::vector<std::string> names_field(const json& j, const char* key, std::size_t line,
                                     bool required) {
  if (!j.contains(key)) {
    if (required) throw MalformedRecord(line, std::string("missing '") + key + "'");
    return {};
  }
  const auto& v = j.at(key);
  if (!v.is_array()) throw MalformedRecord(line, std::string("'") + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw MalformedRecord(line, std::string("'") + key + "' holds a non-string");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::vector<EntityId> resolve(const KnowledgeGraph& kg, const std::vector<std::string>& names,
                              std::vector<std::string>& unresolved) {
  std::vector<EntityId> out;
  for (const auto& n : names) {
    if (auto id = kg.find_entity(n)) out.push_back(*id);
    else unresolved.push_back(n);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::vector<QAInstance> read_dataset(std::istream& in, const KnowledgeGraph& kg) {
  std::vector<QAInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw MalformedRecord(line_no, "not a JSON object");
    if (!j.contains("id") || !j.at("id").is_string()) throw MalformedRecord(line_no, "missing 'id'");
    if (!j.contains("question") || !j.at("question").is_string())
      throw MalformedRecord(line_no, "missing 'question'");

    QAInstance inst;
    inst.id = j.at("id").get<std::string>();
    inst.question = j.at("question").get<std::string>();
    auto topics = names_field(j, "question_entities", line_no, true);
    inst.answer_labels = names_field(j, "answers", line_no, true);
    auto answer_names = names_field(j, "answer_entities", line_no, false);
    if (answer_names.empty()) answer_names = inst.answer_labels;
    inst.question_entities = resolve(kg, topics, inst.unresolved);
    inst.answer_entities = resolve(kg, answer_names, inst.unresolved);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<QAInstance> load_dataset(const std::string& path, const KnowledgeGraph& kg) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset " + path);
  return read_dataset(in, kg);
}

// ---------------------------------------------------------------------------
// Configuration

double LMSpec::effective_semantic_temperature() const {
  if (semantic_temperature >= 0) return semantic_temperature;
  return kind == "http" ? 0.7 : 0.0;
}

std::unique_ptr<LMClient> make_lm_client(const LMSpec& spec) {
  if (spec.kind == "mock") {
    if (spec.script.empty()) return std::make_unique<MockLMClient>();
    return std::make_unique<MockLMClient>(MockLMClient::from_file(spec.script));
  }
  if (spec.kind == "http") return std::make_unique<HttpLMClient>(spec.http);
  throw ConfigError("unknown LM kind '" + spec.kind + "' (expected mock or http)");
}

namespace {

std::string resolve_path(const json& j, const char* key, const fs::path& base) {
  auto v = j.at(key).get<std::string>();
  if (v.empty()) return v;
  fs::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal().string();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  try {
    reject_unknown(j,
                   {"kg_path", "dataset_path", "word_vectors_path", "train_dataset_path",
                    "checkpoint_path", "structural", "rethink", "beam", "k", "max_hops", "lm",
                    "output_dir", "seed", "workers"},
                   "config");
    for (const char* key : {"kg_path", "dataset_path", "word_vectors_path"})
      if (!j.contains(key)) throw ConfigError(std::string("missing '") + key + "'");
    c.kg_path = resolve_path(j, "kg_path", base);
    c.dataset_path = resolve_path(j, "dataset_path", base);
    c.word_vectors_path = resolve_path(j, "word_vectors_path", base);
    if (j.contains("train_dataset_path"))
      c.train_dataset_path = resolve_path(j, "train_dataset_path", base);
    if (j.contains("checkpoint_path")) c.checkpoint_path = resolve_path(j, "checkpoint_path", base);

    if (j.contains("structural")) {
      const auto& s = j.at("structural");
      reject_unknown(s,
                     {"epochs", "batch_size", "learning_rate", "steps", "hidden_dim",
                      "init_range", "adam_beta1", "adam_beta2", "adam_epsilon"},
                     "structural");
      c.train.epochs = s.value("epochs", c.train.epochs);
      c.train.batch_size = s.value("batch_size", c.train.batch_size);
      c.train.learning_rate = s.value("learning_rate", c.train.learning_rate);
      c.train.steps = s.value("steps", c.train.steps);
      c.train.hidden_dim = s.value("hidden_dim", c.train.hidden_dim);
      c.train.init_range = s.value("init_range", c.train.init_range);
      c.train.adam_beta1 = s.value("adam_beta1", c.train.adam_beta1);
      c.train.adam_beta2 = s.value("adam_beta2", c.train.adam_beta2);
      c.train.adam_epsilon = s.value("adam_epsilon", c.train.adam_epsilon);
    }
    if (j.contains("rethink")) {
      const auto& r = j.at("rethink");
      reject_unknown(r, {"lambda1", "lambda2", "theta"}, "rethink");
      c.rethink.lambda1 = r.value("lambda1", c.rethink.lambda1);
      c.rethink.lambda2 = r.value("lambda2", c.rethink.lambda2);
      c.rethink.theta = r.value("theta", c.rethink.theta);
    }
    c.beam = j.value("beam", c.beam);
    c.k = j.value("k", c.k);
    c.max_hops = j.value("max_hops", c.max_hops);
    if (j.contains("lm")) {
      const auto& l = j.at("lm");
      reject_unknown(l,
                     {"kind", "script", "base_url", "model", "token_env", "timeout_seconds",
                      "semantic_temperature", "max_tokens"},
                     "lm");
      c.lm.kind = l.value("kind", c.lm.kind);
      if (l.contains("script")) c.lm.script = resolve_path(l, "script", base);
      c.lm.http.base_url = l.value("base_url", c.lm.http.base_url);
      c.lm.http.model = l.value("model", c.lm.http.model);
      c.lm.http.token_env = l.value("token_env", c.lm.http.token_env);
      c.lm.http.timeout_seconds = l.value("timeout_seconds", c.lm.http.timeout_seconds);
      c.lm.semantic_temperature = l.value("semantic_temperature", c.lm.semantic_temperature);
      c.lm.max_tokens = l.value("max_tokens", c.lm.max_tokens);
    }
    if (j.contains("output_dir")) c.output_dir = resolve_path(j, "output_dir", base);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  c.train.seed = c.seed;
  return c;
}

json PipelineConfig::to_json() const {
  json j = {{"kg_path", kg_path},
            {"dataset_path", dataset_path},
            {"word_vectors_path", word_vectors_path},
            {"train_dataset_path", train_dataset_path},
            {"checkpoint_path", checkpoint_path},
            {"structural",
             {{"epochs", train.epochs},
              {"batch_size", train.batch_size},
              {"learning_rate", train.learning_rate},
              {"steps", train.steps},
              {"hidden_dim", train.hidden_dim},
              {"init_range", train.init_range},
              {"adam_beta1", train.adam_beta1},
              {"adam_beta2", train.adam_beta2},
              {"adam_epsilon", train.adam_epsilon}}},
            {"rethink",
             {{"lambda1", rethink.lambda1}, {"lambda2", rethink.lambda2}, {"theta", rethink.theta}}},
            {"beam", beam},
            {"k", k},
            {"max_hops", max_hops},
            {"lm",
             {{"kind", lm.kind},
              {"script", lm.script},
              {"base_url", lm.http.base_url},
              {"model", lm.http.model},
              {"token_env", lm.http.token_env},
              {"timeout_seconds", lm.http.timeout_seconds},
              {"semantic_temperature", lm.semantic_temperature},
              {"max_tokens", lm.max_tokens}}},
            {"output_dir", output_dir},
            {"seed", seed},
            {"workers", workers}};
  return j;
}

void PipelineConfig::validate() const {
  auto need_file = [](const std::string& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string(what) + " not set");
    if (!fs::is_regular_file(p)) throw ConfigError(std::string(what) + " not found: " + p);
  };
  need_file(kg_path, "kg_path");
  need_file(dataset_path, "dataset_path");
  need_file(word_vectors_path, "word_vectors_path");
  if (!train_dataset_path.empty()) need_file(train_dataset_path, "train_dataset_path");
  if (!checkpoint_path.empty()) need_file(checkpoint_path, "checkpoint_path");
  if (lm.kind == "mock" && !lm.script.empty()) need_file(lm.script, "lm.script");
  if (lm.kind != "mock" && lm.kind != "http") throw ConfigError("lm.kind must be mock or http");
  train.validate();
  rethink.validate();
  if (beam < 1) throw ConfigError("beam must be positive");
  if (k < 1) throw ConfigError("k must be positive");
  if (max_hops < 1) throw ConfigError("max_hops must be positive");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (lm.max_tokens < 1) throw ConfigError("lm.max_tokens must be positive");
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return PipelineConfig::from_json(j, fs::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Resources

Resources load_resources(const PipelineConfig& cfg, std::ostream* log) {
  cfg.validate();
  Resources res;
  res.kg = load_triples(cfg.kg_path);
  res.word_vectors = load_word_vectors(cfg.word_vectors_path);
  res.dataset = load_dataset(cfg.dataset_path, res.kg);
  if (log)
    *log << "kg: " << res.kg.num_entities() << " entities, " << res.kg.num_relations()
         << " relations, " << res.kg.num_triples() << " triples; dataset: " << res.dataset.size()
         << " questions\n";

  if (!cfg.checkpoint_path.empty()) {
    auto ck = load_checkpoint(cfg.checkpoint_path);
    check_compatible(ck.meta, res.kg);
    if (ck.params.word_dim != res.word_vectors.dim())
      throw DimensionMismatch("checkpoint expects word vectors of dimension " +
                              std::to_string(ck.params.word_dim));
    res.params = std::move(ck.params);
    res.structural_source = "checkpoint";
    return res;
  }

  std::vector<QAInstance> train_set;
  const auto* train_data = &res.dataset;
  if (!cfg.train_dataset_path.empty()) {
    train_set = load_dataset(cfg.train_dataset_path, res.kg);
    train_data = &train_set;
  }
  auto tc = cfg.train;
  tc.seed = cfg.seed;
  tc.checkpoint_path.clear();
  auto result = structural::train(res.kg, *train_data, res.word_vectors, tc, log);
  res.params = std::move(result.params);
  res.epoch_loss = std::move(result.epoch_loss);
  res.structural_source = "trained";
  return res;
}

// ---------------------------------------------------------------------------
// Per-question run

Candidates generate_candidates(const QAInstance& inst, const PipelineConfig& cfg,
                               const Resources& res, LMClient& lm) {
  Candidates c;
  SemanticOptions so;
  so.k = cfg.k;
  so.temperature = cfg.lm.effective_semantic_temperature();
  so.max_tokens = cfg.lm.max_tokens;
  try {
    c.semantic = generate_semantic_paths(inst, res.kg, lm, so);
  } catch (const Error& e) {
    c.semantic.prompt = generation_prompt(inst.question);
    c.errors.push_back(std::string("semantic: ") + e.what());
  }
  if (inst.question_entities.empty()) return c;
  try {
    auto enc = structural::encode_question(inst.question, res.word_vectors, res.params,
                                           cfg.train.steps);
    auto trace = structural::forward_pass(res.kg, enc, inst.question_entities, res.params,
                                          Direction::forward);
    structural::DecodeOptions dopt;
    dopt.beam = cfg.beam;
    auto decoded = structural::decode_paths(res.kg, trace, dopt);
    for (const auto& p : decoded.paths) {
      auto q = compact(p, res.kg);
      q.source = Provenance::structural;
      c.structural.insert(std::move(q));
    }
    c.structural.complete = decoded.complete;
  } catch (const Error& e) {
    c.errors.push_back(std::string("structural: ") + e.what());
  }
  return c;
}

namespace {

QuestionRecord run_question(const QAInstance& inst, const PipelineConfig& cfg,
                            const Resources& res, LMClient& lm,
                            const EmbeddingProvider& provider) {
  QuestionRecord rec;
  rec.id = inst.id;
  rec.question = inst.question;
  rec.gold = inst.answer_labels;
  rec.unlinked = inst.question_entities.empty();
  if (rec.unlinked) rec.errors.push_back("no question entity resolved");

  auto cand = generate_candidates(inst, cfg, res, lm);
  rec.errors.insert(rec.errors.end(), cand.errors.begin(), cand.errors.end());
  rec.generation_prompt = cand.semantic.prompt;
  rec.semantic_paths = static_cast<int>(cand.semantic.paths.size());
  rec.semantic_dropped = cand.semantic.dropped;
  rec.structural_paths = static_cast<int>(cand.structural.size());

  try {
    rec.ranking = rethink(res.kg, inst.question, cand.semantic.paths, cand.structural,
                          cfg.rethink, provider);
  } catch (const Error& e) {
    rec.errors.push_back(std::string("rethink: ") + e.what());
  }
  rec.candidates = static_cast<int>(rec.ranking.retained.size() + rec.ranking.filtered.size());
  rec.retained = static_cast<int>(rec.ranking.retained.size());
  rec.fallback = rec.ranking.retained.empty();

  try {
    auto ans = answer(inst, rec.ranking.retained, res.kg, lm);
    rec.reasoning_prompt = std::move(ans.prompt);
    rec.raw_output = std::move(ans.raw);
    rec.predictions = std::move(ans.answers);
    rec.parse_failure = ans.parse_failure;
  } catch (const Error& e) {
    rec.reasoning_prompt = build_reasoning_prompt(inst, rec.ranking.retained, res.kg).text;
    rec.errors.push_back(std::string("answer: ") + e.what());
  }
  rec.hit = hits_at_1(rec.predictions, rec.gold);
  rec.f1 = f1_score(rec.predictions, rec.gold);
  return rec;
}

json ranking_json(const RethinkResult& r) {
  json rows = json::array();
  for (const auto* group : {&r.retained, &r.filtered})
    for (const auto& sp : *group)
      rows.push_back({{"path", sp.text},
                      {"source", to_string(sp.path.source)},
                      {"s1", sp.s1},
                      {"s2", sp.s2},
                      {"s", sp.s},
                      {"retained", sp.retained},
                      {"rank", sp.retained ? json(sp.rank) : json()}});
  return rows;
}

std::string utc_now() {
  auto t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void EvalReport::aggregate() {
  std::vector<double> hits, f1s, kept;
  unlinked = parse_failures = fallbacks = errors = 0;
  for (const auto& r : records) {
    hits.push_back(r.hit);
    f1s.push_back(r.f1);
    kept.push_back(r.retained);
    unlinked += r.unlinked;
    parse_failures += r.parse_failure;
    fallbacks += r.fallback;
    errors += !r.errors.empty();
  }
  hits_at_1 = macro_mean(hits);
  f1 = macro_mean(f1s);
  retained_mean = macro_mean(kept);
}

json EvalReport::to_json() const {
  json recs = json::array();
  for (const auto& r : records) {
    recs.push_back({{"id", r.id},
                    {"question", r.question},
                    {"gold", r.gold},
                    {"predictions", r.predictions},
                    {"hit", r.hit},
                    {"f1", r.f1},
                    {"parse_failure", r.parse_failure},
                    {"fallback", r.fallback},
                    {"unlinked", r.unlinked},
                    {"semantic_paths", r.semantic_paths},
                    {"semantic_dropped", r.semantic_dropped},
                    {"structural_paths", r.structural_paths},
                    {"candidates", r.candidates},
                    {"retained", r.retained},
                    {"ranking", ranking_json(r.ranking)},
                    {"errors", r.errors},
                    {"generation_prompt", r.generation_prompt},
                    {"reasoning_prompt", r.reasoning_prompt},
                    {"raw_output", r.raw_output}});
  }
  return {{"questions", static_cast<int>(records.size())},
          {"hits_at_1", hits_at_1},
          {"f1", f1},
          {"retained_mean", retained_mean},
          {"unlinked", unlinked},
          {"parse_failures", parse_failures},
          {"fallbacks", fallbacks},
          {"errors", errors},
          {"records", std::move(recs)}};
}

std::string EvalReport::table() const {
  std::ostringstream out;
  out << std::left << std::setw(14) << "id" << std::right << std::setw(5) << "hit"
      << std::setw(8) << "f1" << std::setw(6) << "cand" << std::setw(6) << "kept"
      << "  prediction\n";
  for (const auto& r : records) {
    out << std::left << std::setw(14) << r.id << std::right << std::setw(5) << r.hit
        << std::setw(8) << std::fixed << std::setprecision(3) << r.f1 << std::setw(6)
        << r.candidates << std::setw(6) << r.retained << "  "
        << (r.predictions.empty() ? std::string("-") : r.predictions.front());
    if (!r.errors.empty()) out << "  [" << r.errors.front() << "]";
    out << '\n';
  }
  out << std::fixed << std::setprecision(4) << "Hits@1 " << hits_at_1 << "  F1 " << f1
      << "  retained/question " << retained_mean << "  questions " << records.size()
      << "  fallbacks " << fallbacks << "  parse failures " << parse_failures << "  errors "
      << errors << '\n';
  return out.str();
}

EvalReport evaluate(const PipelineConfig& cfg, const Resources& res, LMClient& lm) {
  cfg.rethink.validate();
  EncoderProvider provider(res.kg, res.word_vectors, res.params, cfg.train.steps);
  EvalReport report;
  report.records.resize(res.dataset.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < res.dataset.size(); i = next++)
      report.records[i] = run_question(res.dataset[i], cfg, res, lm, provider);
  };
  const auto n = static_cast<std::size_t>(std::max(1, cfg.workers));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(n, res.dataset.size()); ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  report.aggregate();
  return report;
}

void write_report(const EvalReport& report, const PipelineConfig& cfg, const Resources& res,
                  const fs::path& dir) {
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("report.json");
    out << report.to_json().dump(2) << '\n';
  }
  {
    auto out = open("report.txt");
    out << report.table();
  }
  {
    auto out = open("scores.jsonl");
    for (const auto& r : report.records) write_score_report(out, r.id, r.question, r.ranking);
  }
  {
    auto out = open("manifest.json");
    auto config = cfg.to_json();
    json m = {{"config", config},
              {"config_hash", vocabulary_hash({config.dump()})},
              {"kgpath_version", "0.1.0"},
              {"compiler", __VERSION__},
              {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
              {"structural_source", res.structural_source},
              {"written_at", utc_now()}};
    out << m.dump(2) << '\n';
  }
}

EvalReport run_pipeline(const PipelineConfig& cfg, const Resources& res, LMClient& lm) {
  auto report = evaluate(cfg, res, lm);
  write_report(report, cfg, res, cfg.output_dir);
  return report;
}

EvalReport run_pipeline(const PipelineConfig& cfg, LMClient& lm, std::ostream* log) {
  auto res = load_resources(cfg, log);
  return run_pipeline(cfg, res, lm);
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<SweepRow> sweep(const PipelineConfig& cfg, const Resources& res, LMClient& lm,
                            const std::string& parameter, const std::vector<double>& values) {
  if (parameter != "theta" && parameter != "lambda1")
    throw ConfigError("sweep parameter must be theta or lambda1, got '" + parameter + "'");
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (!std::is_sorted(values.begin(), values.end()))
    throw ConfigError("sweep values must be sorted ascending");

  std::vector<SweepRow> rows;
  for (double v : values) {
    SweepRow row;
    row.value = v;
    auto cell = cfg;
    if (parameter == "theta") {
      cell.rethink.theta = v;
    } else {
      cell.rethink.lambda1 = v;
      cell.rethink.lambda2 = 1.0 - v;
    }
    std::ostringstream name;
    name << parameter << '=' << v;
    try {
      auto report = evaluate(cell, res, lm);
      write_report(report, cell, res, fs::path(cfg.output_dir) / "sweep" / name.str());
      row.hits_at_1 = report.hits_at_1;
      row.f1 = report.f1;
      row.retained_mean = report.retained_mean;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "value,hits_at_1,f1,retained_mean\n";
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      out << r.value << ",,,\n";
      continue;
    }
    out << r.value << ',' << r.hits_at_1 << ',' << r.f1 << ',' << r.retained_mean << '\n';
  }
}

std::string sweep_table(const std::string& parameter, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << std::setw(10) << parameter << std::setw(10) << "Hits@1" << std::setw(10) << "F1"
      << std::setw(10) << "kept" << '\n';
  for (const auto& r : rows) {
    out << std::setw(10) << r.value;
    if (!r.error.empty()) {
      out << "  error: " << r.error << '\n';
      continue;
    }
    out << std::fixed << std::setprecision(4) << std::setw(10) << r.hits_at_1 << std::setw(10)
        << r.f1 << std::setw(10) << r.retained_mean << std::defaultfloat << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Path files

json path_to_json(const ReasoningPath& p, const KnowledgeGraph& kg) {
  json ents = json::array(), rels = json::array();
  for (auto e : p.entities) ents.push_back(kg.entity_name(e));
  for (auto r : p.relations) rels.push_back(kg.relation_name(r));
  return {{"entities", ents}, {"relations", rels}, {"source", to_string(p.source)}};
}

ReasoningPath path_from_json(const json& j, const KnowledgeGraph& kg) {
  ReasoningPath p;
  try {
    for (const auto& e : j.at("entities")) p.entities.push_back(kg.entity_id(e.get<std::string>()));
    for (const auto& r : j.at("relations"))
      p.relations.push_back(kg.relation_id(r.get<std::string>()));
    std::istringstream src(j.value("source", std::string()));
    for (std::string part; std::getline(src, part, '+');) {
      if (part == "gold") p.source = p.source | Provenance::gold;
      else if (part == "semantic") p.source = p.source | Provenance::semantic;
      else if (part == "structural") p.source = p.source | Provenance::structural;
    }
  } catch (const json::exception& e) {
    throw Error(std::string("bad path record: ") + e.what());
  }
  if (!validates(p, kg)) throw Error("path record does not exist in the knowledge graph");
  return p;
}

}  // namespace kgpath
