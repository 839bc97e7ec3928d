#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "kgpath/errors.hpp"
#include "kgpath/kg_store.hpp"
#include "oracles.hpp"

using namespace kgpath;

namespace {

KnowledgeGraph chain() {
  return KnowledgeGraph::from_records({{"A", "r1", "B"}, {"B", "r2", "C"}});
}

KnowledgeGraph diamond() {
  return KnowledgeGraph::from_records(
      {{"A", "r1", "B"}, {"A", "r2", "C"}, {"B", "r3", "D"}, {"C", "r4", "D"}});
}

std::vector<EntityId> ids(const KnowledgeGraph& kg, std::initializer_list<const char*> names) {
  std::vector<EntityId> out;
  for (auto n : names) out.push_back(kg.entity_id(n));
  return out;
}

}  // namespace

TEST_CASE("ingest counts entities and collapses duplicate triples") {
  std::istringstream in("A\tr\tB\nB\tr\tC\nC\ts\tD\n");
  auto kg = ingest_triples(in);
  CHECK(kg.num_entities() == 4);
  CHECK(kg.num_triples() == 3);

  std::istringstream dup("# comment\nA\tr\tB\n\nA\tr\tB\n");
  CHECK(ingest_triples(dup).num_triples() == 1);

  std::istringstream empty("");
  auto none = ingest_triples(empty);
  CHECK(none.num_entities() == 0);
  CHECK(none.num_triples() == 0);
}

TEST_CASE("ingest rejects malformed lines with their line number") {
  std::istringstream in("A\tr\tB\nA\tr\n");
  try {
    ingest_triples(in);
    FAIL("expected MalformedRecord");
  } catch (const MalformedRecord& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream blank_field("A\t\tB\n");
  CHECK_THROWS_AS(ingest_triples(blank_field), MalformedRecord);
  std::istringstream reserved("A\t__stay__\tB\n");
  CHECK_THROWS_AS(ingest_triples(reserved), MalformedRecord);
}

TEST_CASE("vocabularies follow first-seen order") {
  auto kg = KnowledgeGraph::from_records({{"X", "p", "Y"}, {"Z", "q", "X"}});
  CHECK(kg.entity_name(0) == "X");
  CHECK(kg.entity_name(1) == "Y");
  CHECK(kg.entity_name(2) == "Z");
  CHECK(kg.relation_name(0) == "p");
  CHECK(kg.relation_name(kg.inverse(0)) == "~p");
  CHECK(kg.relation_name(kg.stay_relation()) == "__stay__");
  CHECK(kg.find_relation("~q") == kg.inverse(1));
  CHECK_THROWS_AS(kg.entity_id("W"), UnknownEntity);
  CHECK_THROWS_AS(kg.relation_id("nope"), UnknownRelation);
}

TEST_CASE("out and in indices are exact inverses of the triple set") {
  auto fx = testing::make_planted_fixture({.entities = 40, .relations = 5, .rules = 2,
                                           .train = 10, .test = 5});
  const auto& kg = fx.kg;
  std::set<Triple> from_out, from_in;
  for (EntityId e = 0; e < kg.num_entities(); ++e) {
    for (const auto& ed : kg.out_edges(e)) from_out.insert({e, ed.relation, ed.entity});
    for (const auto& ed : kg.in_edges(e)) from_in.insert({ed.entity, ed.relation, e});
  }
  std::set<Triple> all(kg.triples().begin(), kg.triples().end());
  CHECK(from_out == all);
  CHECK(from_in == all);
}

TEST_CASE("neighbors") {
  auto kg = KnowledgeGraph::from_records({{"A", "r1", "B"}});
  KnowledgeGraphBuilder b;
  b.add("A", "r1", "B");
  b.add_entity("Lonely");
  auto with_isolated = std::move(b).build();
  CHECK(neighbors(with_isolated, with_isolated.entity_id("Lonely"), Direction::forward).empty());

  auto back = neighbors(kg, kg.entity_id("B"), Direction::backward);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == Edge{kg.relation_id("r1"), kg.entity_id("A")});

  auto d = diamond();
  auto fwd = neighbors(d, d.entity_id("A"), Direction::forward);
  REQUIRE(fwd.size() == 2);
  CHECK(fwd[0] == Edge{d.relation_id("r1"), d.entity_id("B")});
  CHECK(fwd[1] == Edge{d.relation_id("r2"), d.entity_id("C")});
  CHECK_THROWS_AS(neighbors(d, 99, Direction::forward), UnknownEntity);
}

TEST_CASE("shortest paths on small fixtures") {
  auto kg = chain();
  auto ps = shortest_paths(kg, ids(kg, {"A"}), ids(kg, {"C"}));
  REQUIRE(ps.size() == 1);
  CHECK(ps.complete);
  CHECK(ps.paths[0].entities == ids(kg, {"A", "B", "C"}));
  CHECK(ps.paths[0].relations ==
        std::vector<RelationId>{kg.relation_id("r1"), kg.relation_id("r2")});
  CHECK(ps.paths[0].source == Provenance::gold);

  auto self = shortest_paths(kg, ids(kg, {"A"}), ids(kg, {"A"}));
  REQUIRE(self.size() == 1);
  CHECK(self.paths[0].hops() == 0);

  auto d = diamond();
  auto two = shortest_paths(d, ids(d, {"A"}), ids(d, {"D"}));
  CHECK(two.size() == 2);
  for (const auto& p : two.paths) CHECK(validates(p, d));

  auto none = shortest_paths(kg, ids(kg, {"A"}), ids(kg, {"C"}), {.max_hops = 1});
  CHECK(none.empty());
  CHECK(none.complete);

  auto capped = shortest_paths(d, ids(d, {"A"}), ids(d, {"D"}), {.max_paths = 1});
  CHECK(capped.size() == 1);
  CHECK_FALSE(capped.complete);
}

TEST_CASE("shortest path recovers the circulation-area chain") {
  // Without the direct periodical-language edge the 2-hop chain is minimal.
  auto kg = KnowledgeGraph::from_records({
      {"Zerkalo Nedeli", "book.periodical.language", "English Language"},
      {"Zerkalo Nedeli", "book.periodical.language", "Russian Language"},
      {"Zerkalo Nedeli", "periodicals.newspaper_circulation_area.newspapers", "Ukraine"},
      {"Ukraine", "location.country.languages_spoken", "Ukrainian Language"},
  });
  auto ps = shortest_paths(kg, ids(kg, {"Zerkalo Nedeli"}), ids(kg, {"Ukrainian Language"}));
  REQUIRE(ps.size() == 1);
  CHECK(ps.paths[0].entities == ids(kg, {"Zerkalo Nedeli", "Ukraine", "Ukrainian Language"}));
  CHECK(kg.relation_name(ps.paths[0].relations[0]) ==
        "periodicals.newspaper_circulation_area.newspapers");
  CHECK(kg.relation_name(ps.paths[0].relations[1]) == "location.country.languages_spoken");
}

TEST_CASE("shortest paths match brute force on random graphs") {
  std::mt19937_64 rng(11);
  for (int g = 0; g < 100; ++g) {
    auto kg = oracle::random_graph(rng, 12);
    std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(kg.num_entities() - 1));
    std::vector<EntityId> src{pick(rng)}, dst{pick(rng), pick(rng)};
    auto got = shortest_paths(kg, src, dst);
    auto want = oracle::minimal_simple_paths(kg, src, dst, 4);
    std::set<std::pair<std::vector<EntityId>, std::vector<RelationId>>> a, b;
    for (const auto& p : got.paths) a.insert({p.entities, p.relations});
    for (const auto& p : want) b.insert({p.entities, p.relations});
    CHECK(a == b);
  }
}

TEST_CASE("instantiate relation path") {
  auto kg = testing::zerkalo_kg();
  auto start = kg.entity_id("Zerkalo Nedeli");
  auto g = instantiate_relation_path(kg, start, {{kg.relation_id("book.periodical.language")}});
  REQUIRE(g.paths.size() == 3);
  std::set<std::string> ends;
  for (const auto& p : g.paths) {
    ends.insert(kg.entity_name(p.end()));
    CHECK(validates(p, kg));
  }
  CHECK(ends == std::set<std::string>{"English Language", "Russian Language", "Ukrainian Language"});

  auto zero = instantiate_relation_path(kg, start, {});
  REQUIRE(zero.paths.size() == 1);
  CHECK(zero.paths[0].hops() == 0);

  auto miss = instantiate_relation_path(kg, start,
                                        {{kg.relation_id("location.country.languages_spoken")}});
  CHECK(miss.paths.empty());

  auto cut = instantiate_relation_path(kg, start, {{kg.relation_id("book.periodical.language")}}, 2);
  CHECK(cut.paths.size() == 2);
  CHECK(cut.truncated);

  CHECK_THROWS_AS(instantiate_relation_path(kg, 99, {}), UnknownEntity);
  CHECK_THROWS_AS(instantiate_relation_path(kg, start, {{999}}), UnknownRelation);
}

TEST_CASE("subgraph") {
  auto kg = KnowledgeGraph::from_records(
      {{"a", "r", "b"}, {"b", "r", "c"}, {"c", "r", "d"}, {"d", "r", "e"}});
  std::vector<EntityId> mid{kg.entity_id("c")};
  auto zero = subgraph(kg, mid, 0);
  CHECK(zero.num_entities() == 1);
  CHECK(zero.num_triples() == 0);
  CHECK(subgraph(kg, mid, 1).num_triples() == 2);
  auto all = subgraph(kg, mid, 10);
  std::set<std::array<std::string, 3>> x, y;
  for (const auto& t : kg.triples())
    x.insert({kg.entity_name(t.head), kg.relation_name(t.relation), kg.entity_name(t.tail)});
  for (const auto& t : all.triples())
    y.insert({all.entity_name(t.head), all.relation_name(t.relation), all.entity_name(t.tail)});
  CHECK(x == y);
}

TEST_CASE("triple file round trip") {
  auto fx = testing::make_toy_fixture();
  std::ostringstream out;
  write_triples(fx.kg, out);
  std::istringstream in(out.str());
  auto back = ingest_triples(in);
  REQUIRE(back.num_triples() == fx.kg.num_triples());
  for (const auto& t : fx.kg.triples())
    CHECK(back.has_triple(back.entity_id(fx.kg.entity_name(t.head)),
                          back.relation_id(fx.kg.relation_name(t.relation)),
                          back.entity_id(fx.kg.entity_name(t.tail))));
}

TEST_CASE("path sets merge provenance on duplicates") {
  PathSet s;
  CHECK(s.insert({{0, 1}, {0}, Provenance::semantic}));
  CHECK_FALSE(s.insert({{0, 1}, {0}, Provenance::structural}));
  REQUIRE(s.size() == 1);
  CHECK(to_string(s.paths[0].source) == "semantic+structural");
}

TEST_CASE("compact drops stay hops") {
  auto kg = chain();
  ReasoningPath p{{0, 1, 1}, {kg.relation_id("r1"), kg.stay_relation()}, Provenance::structural};
  CHECK(validates(p, kg));
  auto c = compact(p, kg);
  CHECK(c.entities == std::vector<EntityId>{0, 1});
  CHECK(c.relations == std::vector<RelationId>{kg.relation_id("r1")});
}
