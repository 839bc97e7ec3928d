#include "kgpath/kg_store.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "kgpath/errors.hpp"

namespace kgpath {

std::string to_string(Provenance p) {
  std::string out;
  auto append = [&](Provenance flag, const char* name) {
    if (!has(p, flag)) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  append(Provenance::gold, "gold");
  append(Provenance::semantic, "semantic");
  append(Provenance::structural, "structural");
  return out.empty() ? "none" : out;
}

std::uint32_t Vocabulary::intern(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& KnowledgeGraph::entity_name(EntityId e) const {
  if (!valid_entity(e)) throw UnknownEntity("#" + std::to_string(e));
  return entities_.name(e);
}

std::string KnowledgeGraph::relation_name(RelationId r) const {
  if (is_base(r)) return relations_.name(r);
  if (is_inverse(r)) return kInversePrefix + relations_.name(r - relations_.size());
  if (r == stay_relation()) return std::string(kStayRelation);
  throw UnknownRelation("#" + std::to_string(r));
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view name) const {
  if (name == kStayRelation) return stay_relation();
  if (!name.empty() && name.front() == kInversePrefix) {
    auto base = relations_.find(name.substr(1));
    if (!base) return std::nullopt;
    return static_cast<RelationId>(*base + relations_.size());
  }
  return relations_.find(name);
}

EntityId KnowledgeGraph::entity_id(std::string_view name) const {
  auto id = find_entity(name);
  if (!id) throw UnknownEntity(std::string(name));
  return *id;
}

RelationId KnowledgeGraph::relation_id(std::string_view name) const {
  auto id = find_relation(name);
  if (!id) throw UnknownRelation(std::string(name));
  return *id;
}

RelationId KnowledgeGraph::inverse(RelationId r) const {
  const auto n = static_cast<RelationId>(relations_.size());
  if (r < n) return r + n;
  if (r < 2 * n) return r - n;
  if (r == stay_relation()) return r;
  throw UnknownRelation("#" + std::to_string(r));
}

bool KnowledgeGraph::has_triple(EntityId h, RelationId r, EntityId t) const {
  return std::binary_search(triples_.begin(), triples_.end(), Triple{h, r, t});
}

bool KnowledgeGraph::has_edge(EntityId from, RelationId r, EntityId to) const {
  if (!valid_entity(from) || !valid_entity(to)) return false;
  if (is_base(r)) return has_triple(from, r, to);
  if (is_inverse(r)) return has_triple(to, inverse(r), from);
  if (r == stay_relation()) return from == to;
  return false;
}

std::span<const Edge> KnowledgeGraph::out_edges(EntityId e) const {
  if (!valid_entity(e)) throw UnknownEntity("#" + std::to_string(e));
  return out_[e];
}

std::span<const Edge> KnowledgeGraph::in_edges(EntityId e) const {
  if (!valid_entity(e)) throw UnknownEntity("#" + std::to_string(e));
  return in_[e];
}

std::span<const Edge> KnowledgeGraph::augmented_edges(EntityId e) const {
  if (!valid_entity(e)) throw UnknownEntity("#" + std::to_string(e));
  return augmented_[e];
}

KnowledgeGraph KnowledgeGraph::from_records(
    const std::vector<std::array<std::string, 3>>& records) {
  KnowledgeGraphBuilder b;
  std::size_t line = 0;
  for (const auto& r : records) b.add(r[0], r[1], r[2], ++line);
  return std::move(b).build();
}

void KnowledgeGraphBuilder::add(std::string_view head, std::string_view relation,
                                std::string_view tail, std::size_t line) {
  if (head.empty() || relation.empty() || tail.empty())
    throw MalformedRecord(line, "empty field");
  auto h = kg_.entities_.intern(head);
  auto r = add_relation(relation);
  auto t = kg_.entities_.intern(tail);
  kg_.triples_.push_back({h, r, t});
}

RelationId KnowledgeGraphBuilder::add_relation(std::string_view name) {
  if (name == kStayRelation || name.front() == kInversePrefix)
    throw MalformedRecord(0, "reserved relation name '" + std::string(name) + "'");
  return kg_.relations_.intern(name);
}

KnowledgeGraph KnowledgeGraphBuilder::build() && {
  auto& t = kg_.triples_;
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());

  const auto n_ent = kg_.entities_.size();
  const auto n_rel = static_cast<RelationId>(kg_.relations_.size());
  kg_.out_.assign(n_ent, {});
  kg_.in_.assign(n_ent, {});
  kg_.augmented_.assign(n_ent, {});
  for (const auto& tr : t) {
    kg_.out_[tr.head].push_back({tr.relation, tr.tail});
    kg_.in_[tr.tail].push_back({tr.relation, tr.head});
    kg_.augmented_[tr.head].push_back({tr.relation, tr.tail});
    kg_.augmented_[tr.tail].push_back({tr.relation + n_rel, tr.head});
  }
  for (auto* index : {&kg_.out_, &kg_.in_, &kg_.augmented_})
    for (auto& edges : *index) std::sort(edges.begin(), edges.end());
  return std::move(kg_);
}

namespace {

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

KnowledgeGraph ingest_triples(std::istream& in) {
  KnowledgeGraphBuilder b;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim_cr(raw);
    if (line.empty() || line.front() == '#') continue;
    std::array<std::string_view, 3> fields;
    std::size_t count = 0;
    std::size_t pos = 0;
    while (true) {
      auto tab = line.find('\t', pos);
      auto field = line.substr(pos, tab == std::string_view::npos ? line.npos : tab - pos);
      if (count < 3) fields[count] = field;
      ++count;
      if (tab == std::string_view::npos) break;
      pos = tab + 1;
    }
    if (count != 3)
      throw MalformedRecord(line_no, "expected 3 tab-separated fields, got " +
                                         std::to_string(count));
    b.add(fields[0], fields[1], fields[2], line_no);
  }
  return std::move(b).build();
}

KnowledgeGraph load_triples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open triple file: " + path);
  return ingest_triples(in);
}

void write_triples(const KnowledgeGraph& kg, std::ostream& out) {
  for (const auto& t : kg.triples())
    out << kg.entity_name(t.head) << '\t' << kg.relation_name(t.relation) << '\t'
        << kg.entity_name(t.tail) << '\n';
}

ReasoningPath compact(const ReasoningPath& p, const KnowledgeGraph& kg) {
  ReasoningPath out;
  out.source = p.source;
  out.entities.push_back(p.entities.front());
  for (std::size_t i = 0; i < p.relations.size(); ++i) {
    if (p.relations[i] == kg.stay_relation()) continue;
    out.relations.push_back(p.relations[i]);
    out.entities.push_back(p.entities[i + 1]);
  }
  return out;
}

bool validates(const ReasoningPath& p, const KnowledgeGraph& kg) {
  if (p.entities.size() != p.relations.size() + 1) return false;
  if (!kg.valid_entity(p.entities.front())) return false;
  for (std::size_t i = 0; i < p.relations.size(); ++i)
    if (!kg.has_edge(p.entities[i], p.relations[i], p.entities[i + 1])) return false;
  return true;
}

bool PathSet::insert(ReasoningPath p) {
  for (auto& existing : paths) {
    if (existing.same_as(p)) {
      existing.source = existing.source | p.source;
      return false;
    }
  }
  paths.push_back(std::move(p));
  return true;
}

std::vector<Edge> neighbors(const KnowledgeGraph& kg, EntityId e, Direction direction) {
  auto span = direction == Direction::forward ? kg.out_edges(e) : kg.in_edges(e);
  return {span.begin(), span.end()};
}

namespace {

std::vector<int> bfs_layers(const KnowledgeGraph& kg, std::span<const EntityId> seeds,
                            int max_hops) {
  std::vector<int> dist(kg.num_entities(), -1);
  std::deque<EntityId> queue;
  for (auto s : seeds) {
    if (!kg.valid_entity(s)) throw UnknownEntity("#" + std::to_string(s));
    if (dist[s] == 0) continue;
    dist[s] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    auto u = queue.front();
    queue.pop_front();
    if (dist[u] >= max_hops) continue;
    for (const auto& e : kg.augmented_edges(u)) {
      if (dist[e.entity] != -1) continue;
      dist[e.entity] = dist[u] + 1;
      queue.push_back(e.entity);
    }
  }
  return dist;
}

}  // namespace

std::vector<int> hop_distances(const KnowledgeGraph& kg, std::span<const EntityId> seeds,
                               int max_hops) {
  return bfs_layers(kg, seeds, max_hops);
}

PathSet shortest_paths(const KnowledgeGraph& kg, std::span<const EntityId> sources,
                       std::span<const EntityId> targets, const ShortestPathOptions& opts) {
  PathSet out;
  if (sources.empty() || targets.empty() || opts.max_hops < 0) return out;

  std::set<EntityId> source_set(sources.begin(), sources.end());
  std::set<EntityId> target_set(targets.begin(), targets.end());
  for (auto t : target_set)
    if (!kg.valid_entity(t)) throw UnknownEntity("#" + std::to_string(t));

  std::vector<EntityId> both;
  std::set_intersection(source_set.begin(), source_set.end(), target_set.begin(),
                        target_set.end(), std::back_inserter(both));
  if (!both.empty()) {
    for (auto e : both) out.paths.push_back(ReasoningPath::zero_hop(e, Provenance::gold));
    for (auto s : source_set)
      if (!kg.valid_entity(s)) throw UnknownEntity("#" + std::to_string(s));
    return out;
  }

  std::vector<EntityId> src(source_set.begin(), source_set.end());
  std::vector<EntityId> dst(target_set.begin(), target_set.end());
  auto from_src = bfs_layers(kg, src, opts.max_hops);
  int best = -1;
  for (auto t : dst)
    if (from_src[t] > 0 && (best < 0 || from_src[t] < best)) best = from_src[t];
  if (best < 0) return out;

  // On a globally shortest path the j-th entity sits at distance j from the
  // sources and best - j from the targets, so a layered walk enumerates
  // exactly the minimal paths.
  auto to_dst = bfs_layers(kg, dst, best);

  ReasoningPath current;
  current.source = Provenance::gold;
  std::function<void(EntityId, int)> walk = [&](EntityId u, int depth) {
    if (!out.complete) return;
    if (depth == best) {
      if (out.paths.size() >= opts.max_paths) {
        out.complete = false;
        return;
      }
      out.paths.push_back(current);
      return;
    }
    for (const auto& e : kg.augmented_edges(u)) {
      if (from_src[e.entity] != depth + 1 || to_dst[e.entity] != best - depth - 1) continue;
      current.entities.push_back(e.entity);
      current.relations.push_back(e.relation);
      walk(e.entity, depth + 1);
      current.entities.pop_back();
      current.relations.pop_back();
    }
  };
  for (auto s : src) {
    if (to_dst[s] != best) continue;
    current.entities = {s};
    current.relations.clear();
    walk(s, 0);
  }
  std::sort(out.paths.begin(), out.paths.end());
  return out;
}

Grounding instantiate_relation_path(const KnowledgeGraph& kg, EntityId start,
                                    const RelationPath& rp, std::size_t fanout) {
  if (!kg.valid_entity(start)) throw UnknownEntity("#" + std::to_string(start));
  for (auto r : rp.relations)
    if (!kg.valid_relation(r)) throw UnknownRelation("#" + std::to_string(r));

  Grounding out;
  std::vector<ReasoningPath> frontier{ReasoningPath::zero_hop(start, Provenance::semantic)};
  for (auto r : rp.relations) {
    std::vector<ReasoningPath> next;
    for (const auto& p : frontier) {
      auto extend = [&](EntityId to) {
        if (next.size() >= fanout) {
          out.truncated = true;
          return;
        }
        auto q = p;
        q.entities.push_back(to);
        q.relations.push_back(r);
        next.push_back(std::move(q));
      };
      if (r == kg.stay_relation()) {
        extend(p.end());
        continue;
      }
      auto edges = kg.augmented_edges(p.end());
      auto lo = std::lower_bound(edges.begin(), edges.end(), Edge{r, 0});
      for (auto it = lo; it != edges.end() && it->relation == r; ++it) extend(it->entity);
    }
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  out.paths = std::move(frontier);
  return out;
}

KnowledgeGraph subgraph(const KnowledgeGraph& kg, std::span<const EntityId> seeds, int hops) {
  auto dist = bfs_layers(kg, seeds, std::max(hops, 0));
  std::vector<EntityId> kept_entities;
  for (EntityId e = 0; e < kg.num_entities(); ++e)
    if (dist[e] >= 0) kept_entities.push_back(e);

  std::vector<Triple> kept;
  std::vector<bool> rel_used(kg.num_relations(), false);
  for (const auto& t : kg.triples()) {
    int dh = dist[t.head], dt = dist[t.tail];
    bool reached = (dh >= 0 && dh < hops) || (dt >= 0 && dt < hops);
    if (!reached) continue;
    kept.push_back(t);
    rel_used[t.relation] = true;
  }

  KnowledgeGraphBuilder b;
  for (auto e : kept_entities) b.add_entity(kg.entity_name(e));
  for (RelationId r = 0; r < kg.num_relations(); ++r)
    if (rel_used[r]) b.add_relation(kg.relation_name(r));
  for (const auto& t : kept)
    b.add(kg.entity_name(t.head), kg.relation_name(t.relation), kg.entity_name(t.tail));
  return std::move(b).build();
}

}  // namespace kgpath
