#include "fixtures.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace kgpath::testing {

namespace {

const std::array<const char*, 16> kRelationWords = {
    "capital", "currency", "language", "leader",   "founder", "river",  "mountain", "author",
    "genre",   "director", "spouse",   "employer", "coach",   "anthem", "mascot",   "sponsor"};

std::string entity_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "ent%03d", i);
  return buf;
}

}  // namespace

PlantedFixture make_planted_fixture(const PlantedOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  const int n_ent = opts.entities;
  const int n_rel = std::min<int>(opts.relations, static_cast<int>(kRelationWords.size()));
  std::uniform_int_distribution<int> pick_entity(0, n_ent - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  // tail[h][r] = t or -1
  std::vector<std::vector<int>> tail(n_ent, std::vector<int>(n_rel, -1));
  for (int h = 0; h < n_ent; ++h)
    for (int r = 0; r < n_rel; ++r)
      if (coin(rng) < opts.background_density) tail[h][r] = pick_entity(rng);

  // Distinct relation pairs for the rules.
  std::vector<std::pair<int, int>> rules;
  std::uniform_int_distribution<int> pick_rel(0, n_rel - 1);
  while (static_cast<int>(rules.size()) < opts.rules) {
    int a = pick_rel(rng), b = pick_rel(rng);
    if (a == b) continue;
    if (std::find(rules.begin(), rules.end(), std::make_pair(a, b)) != rules.end()) continue;
    rules.emplace_back(a, b);
  }

  struct Planted {
    int rule;
    int head;
  };
  std::vector<Planted> planted;
  std::set<std::pair<int, int>> used;
  const int wanted = opts.train + opts.test;
  std::uniform_int_distribution<int> pick_rule(0, opts.rules - 1);
  while (static_cast<int>(planted.size()) < wanted) {
    int k = pick_rule(rng);
    int x = pick_entity(rng);
    if (used.count({k, x})) continue;
    auto [a, b] = rules[k];
    if (tail[x][a] < 0) {
      int y = pick_entity(rng);
      if (y == x) continue;
      tail[x][a] = y;
    }
    int y = tail[x][a];
    if (tail[y][b] < 0) {
      int z = pick_entity(rng);
      if (z == x || z == y) continue;
      tail[y][b] = z;
    }
    if (tail[y][b] == x) continue;
    used.insert({k, x});
    planted.push_back({k, x});
  }

  KnowledgeGraphBuilder builder;
  for (int e = 0; e < n_ent; ++e) builder.add_entity(entity_name(e));
  for (int r = 0; r < n_rel; ++r) builder.add_relation(std::string("rel.") + kRelationWords[r]);
  for (int h = 0; h < n_ent; ++h)
    for (int r = 0; r < n_rel; ++r)
      if (tail[h][r] >= 0)
        builder.add(entity_name(h), std::string("rel.") + kRelationWords[r],
                    entity_name(tail[h][r]));

  PlantedFixture fx;
  fx.kg = std::move(builder).build();
  for (auto [a, b] : rules)
    fx.rules.push_back({static_cast<RelationId>(a), static_cast<RelationId>(b)});

  fx.word_vectors = WordVectorTable(opts.word_dim);
  std::uniform_real_distribution<double> component(-0.5, 0.5);
  auto add_word = [&](const std::string& w) {
    Eigen::VectorXd v(opts.word_dim);
    for (int i = 0; i < opts.word_dim; ++i) v[i] = component(rng);
    fx.word_vectors.add(w, v);
  };
  for (const char* w : {"what", "is", "the", "of", "rel"}) add_word(w);
  for (int r = 0; r < n_rel; ++r) add_word(kRelationWords[r]);

  for (std::size_t q = 0; q < planted.size(); ++q) {
    auto [k, x] = planted[q];
    auto [a, b] = rules[k];
    int z = tail[tail[x][a]][b];
    QAInstance inst;
    inst.id = "planted-" + std::to_string(q);
    inst.question = std::string("what is the ") + kRelationWords[b] + " of the " +
                    kRelationWords[a] + " of " + entity_name(x);
    inst.question_entities = {fx.kg.entity_id(entity_name(x))};
    inst.answer_entities = {fx.kg.entity_id(entity_name(z))};
    inst.answer_labels = {entity_name(z)};
    auto via = fx.kg.entity_id(entity_name(tail[x][a]));
    if (static_cast<int>(q) < opts.train) {
      fx.train.push_back(std::move(inst));
      fx.train_via.push_back(via);
    } else {
      fx.test.push_back(std::move(inst));
      fx.test_via.push_back(via);
    }
  }
  return fx;
}

KnowledgeGraph zerkalo_kg() {
  return KnowledgeGraph::from_records({
      {"Zerkalo Nedeli", "book.periodical.language", "English Language"},
      {"Zerkalo Nedeli", "book.periodical.language", "Russian Language"},
      {"Zerkalo Nedeli", "book.periodical.language", "Ukrainian Language"},
      {"Zerkalo Nedeli", "periodicals.newspaper_circulation_area.newspapers", "Ukraine"},
      {"Ukraine", "location.country.languages_spoken", "Ukrainian Language"},
  });
}

ZerkaloCandidates zerkalo_candidates(const KnowledgeGraph& kg) {
  const auto zn = kg.entity_id("Zerkalo Nedeli");
  ZerkaloCandidates c;
  c.structural.insert({{zn, kg.entity_id("Ukraine"), kg.entity_id("Ukrainian Language")},
                       {kg.relation_id("periodicals.newspaper_circulation_area.newspapers"),
                        kg.relation_id("location.country.languages_spoken")},
                       Provenance::structural});
  for (const char* lang : {"English Language", "Russian Language", "Ukrainian Language"})
    c.semantic.insert({{zn, kg.entity_id(lang)},
                       {kg.relation_id("book.periodical.language")},
                       Provenance::semantic});
  return c;
}

void install_zerkalo_vectors(TableProvider& provider, const KnowledgeGraph& kg) {
  provider.set_question(kZerkaloQuestion, Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1));
  for (EntityId e = 0; e < kg.num_entities(); ++e) provider.set_entity(e, Eigen::Vector2d(1, 1));
  provider.set_path(
      "Zerkalo Nedeli -> periodicals.newspaper_circulation_area.newspapers -> Ukraine -> "
      "location.country.languages_spoken -> Ukrainian Language",
      Eigen::Vector2d(1, 0));
  provider.set_path("Zerkalo Nedeli -> book.periodical.language -> Ukrainian Language",
                    Eigen::Vector2d(1, 0.5));
  provider.set_path("Zerkalo Nedeli -> book.periodical.language -> Russian Language",
                    Eigen::Vector2d(1, 1));
  provider.set_path("Zerkalo Nedeli -> book.periodical.language -> English Language",
                    Eigen::Vector2d(1, 2));
}

QAInstance zerkalo_instance(const KnowledgeGraph& kg) {
  QAInstance q;
  q.id = "zerkalo";
  q.question = kZerkaloQuestion;
  q.question_entities = {kg.entity_id("Zerkalo Nedeli")};
  q.answer_entities = {kg.entity_id("Ukrainian Language")};
  q.answer_labels = {"Ukrainian Language"};
  return q;
}

ToyFixture make_toy_fixture() {
  struct Country {
    const char* name;
    const char* capital;
    const char* language;
    const char* currency;
  };
  const std::array<Country, 10> countries = {{
      {"France", "Paris", "French", "Euro"},
      {"Japan", "Tokyo", "Japanese", "Yen"},
      {"Brazil", "Brasilia", "Portuguese", "Real"},
      {"Kenya", "Nairobi", "Swahili", "Shilling"},
      {"Norway", "Oslo", "Norwegian", "Krone"},
      {"Peru", "Lima", "Spanish", "Sol"},
      {"Egypt", "Cairo", "Arabic", "Pound"},
      {"Poland", "Warsaw", "Polish", "Zloty"},
      {"Vietnam", "Hanoi", "Vietnamese", "Dong"},
      {"Turkey", "Ankara", "Turkish", "Lira"},
  }};

  ToyFixture fx;
  std::ostringstream tsv;
  tsv << "# toy geography graph\n";
  for (const auto& c : countries) {
    tsv << c.name << "\tlocation.country.capital\t" << c.capital << '\n';
    tsv << c.name << "\tlocation.country.official_language\t" << c.language << '\n';
    tsv << c.name << "\tlocation.country.currency\t" << c.currency << '\n';
    tsv << c.capital << "\tlocation.location.containedby\t" << c.name << '\n';
  }
  fx.triples_tsv = tsv.str();
  std::istringstream in(fx.triples_tsv);
  fx.kg = ingest_triples(in);

  std::ostringstream jsonl;
  int q = 0;
  auto add = [&](const std::string& question, const std::string& topic,
                 const std::string& answer) {
    QAInstance inst;
    inst.id = "toy-" + std::to_string(q++);
    inst.question = question;
    inst.question_entities = {fx.kg.entity_id(topic)};
    inst.answer_entities = {fx.kg.entity_id(answer)};
    inst.answer_labels = {answer};
    nlohmann::json j = {{"id", inst.id},
                        {"question", inst.question},
                        {"question_entities", {topic}},
                        {"answers", {answer}}};
    jsonl << j.dump() << '\n';
    fx.questions.push_back(std::move(inst));
  };
  for (const auto& c : countries)
    add(std::string("what is the capital of ") + c.name, c.name, c.capital);
  for (const auto& c : countries)
    add(std::string("what language is spoken in the country containing ") + c.capital,
        c.capital, c.language);
  fx.dataset_jsonl = jsonl.str();

  const int dim = 8;
  fx.word_vectors = WordVectorTable(dim);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> component(-0.5, 0.5);
  std::ostringstream wv;
  wv.precision(17);
  std::set<std::string> vocab;
  for (const auto& inst : fx.questions)
    for (auto& t : tokenize(inst.question)) vocab.insert(t);
  for (std::size_t r = 0; r < fx.kg.num_relations(); ++r)
    for (auto& t : tokenize(fx.kg.relation_name(static_cast<RelationId>(r)))) vocab.insert(t);
  for (const auto& token : vocab) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = component(rng);
    fx.word_vectors.add(token, v);
    wv << token;
    for (int i = 0; i < dim; ++i) wv << ' ' << v[i];
    wv << '\n';
  }
  fx.word_vectors_txt = wv.str();
  return fx;
}

std::string toy_mock_script() {
  auto fx = make_toy_fixture();
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& q : fx.questions) {
    const bool capital = q.question.rfind("what is the capital of", 0) == 0;
    nlohmann::json paths =
        capital ? nlohmann::json{"location.country.capital", "location.country.currency",
                                 "the capital city"}
                : nlohmann::json{"location.location.containedby -> location.country.official_language",
                                 "location.location.containedby",
                                 "location.country.anthem"};
    rules.push_back({{"match", {"Please generate the valid reasoning paths", q.question}},
                     {"responses", paths}});
    const auto& gold = q.answer_labels.front();
    std::string reply = capital ? nlohmann::json::array({gold}).dump()
                                : "Based on the reasoning paths, the answers are: [\"" + gold + "\"]";
    rules.push_back({{"match", {"Reasoning Paths:", "Question:\n" + q.question}},
                     {"responses", {reply}}});
  }
  nlohmann::json script = {{"rules", rules}, {"default_responses", nlohmann::json::array()},
                           {"uniform_vocab", 1000}};
  return script.dump(2) + "\n";
}

std::string toy_config() {
  nlohmann::json cfg = {{"kg_path", "triples.tsv"},
                        {"dataset_path", "dataset.jsonl"},
                        {"word_vectors_path", "word_vectors.txt"},
                        {"structural", {{"epochs", 80}, {"batch_size", 40}, {"steps", 2}}},
                        {"rethink", {{"lambda1", 0.5}, {"lambda2", 0.5}, {"theta", 0.3}}},
                        {"beam", 5},
                        {"k", 3},
                        {"lm", {{"kind", "mock"}, {"script", "mock_lm.json"}}},
                        {"output_dir", "out"},
                        {"seed", 7}};
  return cfg.dump(2) + "\n";
}

void write_toy_workspace(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto fx = make_toy_fixture();
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
  };
  put("triples.tsv", fx.triples_tsv);
  put("dataset.jsonl", fx.dataset_jsonl);
  put("word_vectors.txt", fx.word_vectors_txt);
  put("mock_lm.json", toy_mock_script());
  put("config.json", toy_config());
}

}  // namespace kgpath::testing
