#include "kgpath/semantic_distiller.hpp"

#include <algorithm>
#include <ostream>

#include <nlohmann/json.hpp>

#include "kgpath/errors.hpp"

namespace kgpath {

namespace {

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\"'`";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Splits on "->" and trims; tolerant of missing spaces around the arrow.
std::vector<std::string> split_path(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = text.find("->", pos);
    auto piece = trim(text.substr(pos, next == std::string_view::npos ? next : next - pos));
    out.emplace_back(piece);
    if (next == std::string_view::npos) break;
    pos = next + 2;
  }
  return out;
}

}  // namespace

PathPosterior path_posterior(const KnowledgeGraph& kg, const QAInstance& inst, int max_hops) {
  PathPosterior post;
  if (!inst.linked()) {
    post.empty = true;
    post.reason = inst.question_entities.empty() ? "no linked question entity"
                                                 : "no linked answer entity";
    return post;
  }
  ShortestPathOptions opts;
  opts.max_hops = max_hops;
  auto set = shortest_paths(kg, inst.question_entities, inst.answer_entities, opts);
  post.truncated = !set.complete;
  if (set.empty()) {
    post.empty = true;
    post.reason = "no path within " + std::to_string(max_hops) + " hops";
    return post;
  }
  post.support = std::move(set.paths);
  post.prob.assign(post.support.size(), 1.0 / static_cast<double>(post.support.size()));
  return post;
}

std::string path_to_text(const ReasoningPath& p, const KnowledgeGraph& kg) {
  std::string out = kg.entity_name(p.entities.front());
  for (std::size_t i = 0; i < p.relations.size(); ++i) {
    if (p.relations[i] == kg.stay_relation()) continue;
    out.append(kPathSeparator);
    out.append(kg.relation_name(p.relations[i]));
    out.append(kPathSeparator);
    out.append(kg.entity_name(p.entities[i + 1]));
  }
  return out;
}

std::string path_to_text(const RelationPath& p, const KnowledgeGraph& kg) {
  std::string out;
  for (auto r : p.relations) {
    if (r == kg.stay_relation()) continue;
    if (!out.empty()) out.append(kPathSeparator);
    out.append(kg.relation_name(r));
  }
  return out;
}

ParsedPath parse_path_text(std::string_view text, const KnowledgeGraph& kg) {
  auto tokens = split_path(text);
  ParsedPath out;

  // Grounded form: relations at every odd position and nowhere else.
  bool grounded = tokens.size() >= 3 && tokens.size() % 2 == 1;
  for (std::size_t i = 0; grounded && i < tokens.size(); ++i)
    grounded = kg.find_relation(tokens[i]).has_value() == (i % 2 == 1);
  if (grounded) {
    for (std::size_t i = 1; i < tokens.size(); i += 2)
      out.path.relations.push_back(*kg.find_relation(tokens[i]));
    return out;
  }

  for (const auto& tok : tokens) {
    if (tok.empty()) continue;
    if (auto r = kg.find_relation(tok)) {
      if (*r != kg.stay_relation()) out.path.relations.push_back(*r);
    } else if (!kg.find_entity(tok)) {
      out.unknown.push_back(tok);
    }
  }
  if (out.path.relations.empty()) throw UnparsablePath(std::string(text));
  return out;
}

std::string generation_prompt(std::string_view question) {
  std::string out =
      "Please generate the valid reasoning paths that can be helpful for answering the "
      "following question:\n\n";
  out.append(question);
  return out;
}

DistillationSet build_distillation_targets(const KnowledgeGraph& kg,
                                           std::span<const QAInstance> dataset, int max_hops) {
  DistillationSet out;
  for (const auto& inst : dataset) {
    auto post = path_posterior(kg, inst, max_hops);
    if (post.empty) {
      out.excluded.push_back({inst.id, post.reason});
      continue;
    }
    for (const auto& p : post.support)
      out.pairs.push_back({inst.question, path_to_text(p.relation_path(), kg), inst.id});
  }
  return out;
}

void write_distillation_jsonl(const DistillationSet& set, std::ostream& out) {
  for (const auto& p : set.pairs) {
    nlohmann::json j = {{"prompt", generation_prompt(p.question)}, {"completion", p.target_text}};
    out << j.dump() << '\n';
  }
}

double distillation_loss(std::span<const DistillationPair> pairs, LMClient& lm) {
  if (pairs.empty()) throw EmptyBatch();
  double sum = 0;
  for (const auto& p : pairs) sum += lm.logprob(generation_prompt(p.question), p.target_text);
  return -sum / static_cast<double>(pairs.size());
}

SemanticPaths generate_semantic_paths(const QAInstance& inst, const KnowledgeGraph& kg,
                                      LMClient& lm, const SemanticOptions& opts) {
  if (opts.k < 1) throw ConfigError("k must be at least 1");
  SemanticPaths out;
  out.prompt = generation_prompt(inst.question);
  GenerateOptions g;
  g.num_return = opts.k;
  g.temperature = opts.temperature;
  g.max_tokens = opts.max_tokens;
  out.candidates = lm.generate(out.prompt, g);
  if (static_cast<int>(out.candidates.size()) < opts.k) {
    out.dropped += opts.k - static_cast<int>(out.candidates.size());
    out.diagnostics.push_back("LM returned " + std::to_string(out.candidates.size()) + " of " +
                              std::to_string(opts.k) + " candidates");
  }

  for (const auto& cand : out.candidates) {
    ParsedPath parsed;
    try {
      parsed = parse_path_text(cand, kg);
    } catch (const UnparsablePath& e) {
      ++out.dropped;
      out.diagnostics.push_back(e.what());
      continue;
    }
    if (parsed.rejected()) {
      ++out.dropped;
      std::string why = "unknown relation(s):";
      for (const auto& u : parsed.unknown) why += " '" + u + "'";
      out.diagnostics.push_back(why);
      continue;
    }
    bool grounded = false;
    for (auto q : inst.question_entities) {
      auto g = instantiate_relation_path(kg, q, parsed.path, opts.fanout);
      for (auto& p : g.paths) {
        p.source = Provenance::semantic;
        out.paths.insert(std::move(p));
        grounded = true;
      }
      if (g.truncated) out.paths.complete = false;
    }
    if (!grounded) {
      ++out.dropped;
      out.diagnostics.push_back("no grounding for '" + path_to_text(parsed.path, kg) + "'");
    }
  }
  std::sort(out.paths.paths.begin(), out.paths.paths.end());
  return out;
}

}  // namespace kgpath
