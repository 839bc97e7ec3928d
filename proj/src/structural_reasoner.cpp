#include "kgpath/structural_reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "kgpath/checkpoint.hpp"
#include "kgpath/errors.hpp"

namespace kgpath::structural {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd sigmoid(const MatrixXd& m) { return m.unaryExpr([](double x) { return sigmoid(x); }); }

VectorXd softmax(const VectorXd& s) {
  VectorXd out = (s.array() - s.maxCoeff()).exp();
  return out / out.sum();
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (steps <= 0) throw ConfigError("steps must be positive");
  if (hidden_dim <= 0) throw ConfigError("hidden_dim must be positive");
  if (!(init_range > 0)) throw ConfigError("init_range must be positive");
}

// ---------------------------------------------------------------------------
// Parameters

ReasonerParams ReasonerParams::init(int word_dim, int hidden_dim, int num_relations,
                                    std::uint64_t seed, double range) {
  if (word_dim <= 0 || hidden_dim <= 0 || num_relations <= 0)
    throw DimensionMismatch("parameter dimensions must be positive");
  ReasonerParams p;
  p.word_dim = word_dim;
  p.hidden_dim = hidden_dim;
  p.num_relations = num_relations;
  const int d = hidden_dim;
  p.relation_emb.resize(num_relations, d);
  p.w1.resize(d, d);
  p.w2.resize(d, d);
  p.ffn_w1.resize(d, 2 * d);
  p.ffn_b1.resize(d, 1);
  p.ffn_w2.resize(d, d);
  p.ffn_b2.resize(d, 1);
  p.score.resize(d, 1);
  p.encoder.input.resize(4 * d, word_dim);
  p.encoder.recurrent.resize(4 * d, d);
  p.encoder.bias.resize(4 * d, 1);
  p.decoder.input.resize(4 * d, d);
  p.decoder.recurrent.resize(4 * d, d);
  p.decoder.bias.resize(4 * d, 1);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  for (auto& t : p.tensors())
    for (Eigen::Index i = 0; i < t.value->size(); ++i) t.value->data()[i] = dist(rng);
  return p;
}

ReasonerParams ReasonerParams::zeros_like() const {
  ReasonerParams z = *this;
  for (auto& t : z.tensors()) t.value->setZero();
  return z;
}

std::vector<NamedTensor> ReasonerParams::tensors() {
  return {{"relation_emb", &relation_emb},
          {"w1", &w1},
          {"w2", &w2},
          {"ffn_w1", &ffn_w1},
          {"ffn_b1", &ffn_b1},
          {"ffn_w2", &ffn_w2},
          {"ffn_b2", &ffn_b2},
          {"score", &score},
          {"encoder.input", &encoder.input},
          {"encoder.recurrent", &encoder.recurrent},
          {"encoder.bias", &encoder.bias},
          {"decoder.input", &decoder.input},
          {"decoder.recurrent", &decoder.recurrent},
          {"decoder.bias", &decoder.bias}};
}

std::vector<ConstNamedTensor> ReasonerParams::tensors() const {
  std::vector<ConstNamedTensor> out;
  for (auto& t : const_cast<ReasonerParams*>(this)->tensors()) out.push_back({t.name, t.value});
  return out;
}

std::size_t ReasonerParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += static_cast<std::size_t>(t.value->size());
  return n;
}

bool ReasonerParams::all_finite() const {
  for (const auto& t : tensors())
    if (!t.value->allFinite()) return false;
  return true;
}

void ReasonerParams::check_shapes() const {
  const int d = hidden_dim;
  auto expect = [](const MatrixXd& m, Eigen::Index r, Eigen::Index c, const char* name) {
    if (m.rows() != r || m.cols() != c)
      throw DimensionMismatch(std::string(name) + " is " + std::to_string(m.rows()) + "x" +
                              std::to_string(m.cols()) + ", expected " + std::to_string(r) +
                              "x" + std::to_string(c));
  };
  expect(relation_emb, num_relations, d, "relation_emb");
  expect(w1, d, d, "w1");
  expect(w2, d, d, "w2");
  expect(ffn_w1, d, 2 * d, "ffn_w1");
  expect(ffn_b1, d, 1, "ffn_b1");
  expect(ffn_w2, d, d, "ffn_w2");
  expect(ffn_b2, d, 1, "ffn_b2");
  expect(score, d, 1, "score");
  expect(encoder.input, 4 * d, word_dim, "encoder.input");
  expect(encoder.recurrent, 4 * d, d, "encoder.recurrent");
  expect(encoder.bias, 4 * d, 1, "encoder.bias");
  expect(decoder.input, 4 * d, d, "decoder.input");
  expect(decoder.recurrent, 4 * d, d, "decoder.recurrent");
  expect(decoder.bias, 4 * d, 1, "decoder.bias");
}

// ---------------------------------------------------------------------------
// LSTM

namespace {

struct LstmStep {
  VectorXd x, h_prev, c_prev;
  VectorXd i, f, g, o;
  VectorXd c, tanh_c, h;
};

LstmStep lstm_forward(const LstmWeights& w, const VectorXd& x, const VectorXd& h_prev,
                      const VectorXd& c_prev) {
  const Eigen::Index d = h_prev.size();
  VectorXd z = w.input * x + w.recurrent * h_prev + w.bias.col(0);
  LstmStep s;
  s.x = x;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  s.i = z.segment(0, d).unaryExpr([](double v) { return sigmoid(v); });
  s.f = z.segment(d, d).unaryExpr([](double v) { return sigmoid(v); });
  s.g = z.segment(2 * d, d).array().tanh();
  s.o = z.segment(3 * d, d).unaryExpr([](double v) { return sigmoid(v); });
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.tanh_c = s.c.array().tanh();
  s.h = s.o.cwiseProduct(s.tanh_c);
  return s;
}

// dh/dc flow in from later use; dx, dh_prev, dc_prev flow out.
void lstm_backward(const LstmWeights& w, const LstmStep& s, const VectorXd& dh,
                   const VectorXd& dc, LstmWeights& grad, VectorXd& dx, VectorXd& dh_prev,
                   VectorXd& dc_prev) {
  const Eigen::Index d = s.h.size();
  VectorXd dc_total =
      dc + dh.cwiseProduct(s.o).cwiseProduct((1.0 - s.tanh_c.array().square()).matrix());
  VectorXd dz(4 * d);
  dz.segment(0, d) = dc_total.cwiseProduct(s.g).cwiseProduct(
      s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
  dz.segment(d, d) = dc_total.cwiseProduct(s.c_prev).cwiseProduct(
      s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
  dz.segment(2 * d, d) =
      dc_total.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());
  dz.segment(3 * d, d) = dh.cwiseProduct(s.tanh_c).cwiseProduct(
      s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
  grad.input.noalias() += dz * s.x.transpose();
  grad.recurrent.noalias() += dz * s.h_prev.transpose();
  grad.bias.col(0) += dz;
  dx = w.input.transpose() * dz;
  dh_prev = w.recurrent.transpose() * dz;
  dc_prev = dc_total.cwiseProduct(s.f);
}

struct EncoderTrace {
  std::vector<LstmStep> encoder;
  std::vector<LstmStep> decoder;
};

QuestionEncoding encode_traced(const MatrixXd& tokens, const ReasonerParams& params, int steps,
                               EncoderTrace* trace) {
  if (tokens.cols() == 0) throw Error("question has no tokens");
  if (tokens.rows() != params.word_dim)
    throw DimensionMismatch("word vectors have " + std::to_string(tokens.rows()) +
                            " components, encoder expects " + std::to_string(params.word_dim));
  if (steps <= 0) throw Error("reasoning steps must be positive");
  const int d = params.hidden_dim;
  VectorXd h = VectorXd::Zero(d), c = VectorXd::Zero(d);
  for (Eigen::Index t = 0; t < tokens.cols(); ++t) {
    auto s = lstm_forward(params.encoder, tokens.col(t), h, c);
    h = s.h;
    c = s.c;
    if (trace) trace->encoder.push_back(std::move(s));
  }
  QuestionEncoding enc;
  enc.question = h;
  VectorXd x = h;
  for (int i = 0; i < steps; ++i) {
    auto s = lstm_forward(params.decoder, x, h, c);
    h = s.h;
    c = s.c;
    x = s.h;
    enc.instructions.push_back(s.h);
    if (trace) trace->decoder.push_back(std::move(s));
  }
  return enc;
}

// d_instructions[i] = dL/d omega^{i+1}.
void encoder_backward(const EncoderTrace& trace, const ReasonerParams& params,
                      const std::vector<VectorXd>& d_instructions, ReasonerParams& grad) {
  const int d = params.hidden_dim;
  const int n = static_cast<int>(trace.decoder.size());
  VectorXd dh_next_input = VectorXd::Zero(d);  // from decoder step i+1's input
  VectorXd dh = VectorXd::Zero(d), dc = VectorXd::Zero(d);
  VectorXd dx, dh_prev, dc_prev;
  for (int i = n - 1; i >= 0; --i) {
    VectorXd dh_out = d_instructions[i] + dh_next_input + dh;
    lstm_backward(params.decoder, trace.decoder[i], dh_out, dc, grad.decoder, dx, dh_prev,
                  dc_prev);
    dh_next_input = dx;
    dh = dh_prev;
    dc = dc_prev;
  }
  // First decoder input and initial decoder state are both the encoder output.
  dh += dh_next_input;
  for (int t = static_cast<int>(trace.encoder.size()) - 1; t >= 0; --t) {
    lstm_backward(params.encoder, trace.encoder[t], dh, dc, grad.encoder, dx, dh_prev, dc_prev);
    dh = dh_prev;
    dc = dc_prev;
  }
}

}  // namespace

QuestionEncoding encode_question(std::string_view question, const WordVectorTable& wv,
                                 const ReasonerParams& params, int steps) {
  if (wv.dim() != params.word_dim)
    throw DimensionMismatch("word-vector table has dimension " + std::to_string(wv.dim()) +
                            ", encoder expects " + std::to_string(params.word_dim));
  return encode_traced(wv.embed(question), params, steps, nullptr);
}

VectorXd encode_tokens(const MatrixXd& tokens, const ReasonerParams& params) {
  return encode_traced(tokens, params, 1, nullptr).question;
}

// ---------------------------------------------------------------------------
// Graph views

int LocalGraph::local_index(EntityId e) const {
  auto it = std::lower_bound(entities.begin(), entities.end(), e);
  if (it == entities.end() || *it != e) return -1;
  return static_cast<int>(it - entities.begin());
}

namespace {

LocalGraph make_local_graph(const KnowledgeGraph& kg, std::vector<EntityId> members) {
  LocalGraph g;
  g.entities = std::move(members);
  const auto stay = kg.stay_relation();
  for (int u = 0; u < g.size(); ++u) {
    auto edges = kg.augmented_edges(g.entities[u]);
    for (std::size_t k = 0; k < edges.size();) {
      // Counts come from the whole graph, not just the local view.
      std::size_t j = k;
      while (j < edges.size() && edges[j].relation == edges[k].relation) ++j;
      g.relation_counts.push_back({u, edges[k].relation, static_cast<double>(j - k)});
      k = j;
    }
    for (const auto& e : edges) {
      int v = g.local_index(e.entity);
      if (v >= 0) g.edges.push_back({u, e.relation, v});
    }
    g.edges.push_back({u, stay, u});
  }
  return g;
}

}  // namespace

LocalGraph build_local_graph(const KnowledgeGraph& kg, std::span<const EntityId> seeds, int hops) {
  if (seeds.empty()) throw UnknownEntity("empty seed set");
  auto dist = hop_distances(kg, seeds, hops);
  std::vector<EntityId> members;
  for (EntityId e = 0; e < kg.num_entities(); ++e)
    if (dist[e] >= 0) members.push_back(e);
  return make_local_graph(kg, std::move(members));
}

LocalGraph build_full_graph(const KnowledgeGraph& kg) {
  std::vector<EntityId> members(kg.num_entities());
  std::iota(members.begin(), members.end(), EntityId{0});
  return make_local_graph(kg, std::move(members));
}

namespace {

// sum_{(e,r,e')} v_r per local entity (L x d).
MatrixXd relation_sums(const LocalGraph& graph, const ReasonerParams& params) {
  MatrixXd s = MatrixXd::Zero(graph.size(), params.hidden_dim);
  for (const auto& c : graph.relation_counts)
    s.row(c.entity) += c.count * params.relation_emb.row(c.relation);
  return s;
}

}  // namespace

MatrixXd init_entity_embeddings(const LocalGraph& graph, const ReasonerParams& params) {
  for (const auto& c : graph.relation_counts)
    if (static_cast<int>(c.relation) >= params.num_relations)
      throw DimensionMismatch("relation id beyond parameter table");
  return sigmoid(relation_sums(graph, params) * params.w1.transpose());
}

MatrixXd init_entity_embeddings(const KnowledgeGraph& kg, const ReasonerParams& params) {
  if (static_cast<int>(kg.num_augmented_relations()) != params.num_relations)
    throw DimensionMismatch("knowledge graph has " + std::to_string(kg.num_augmented_relations()) +
                            " augmented relations, parameters have " +
                            std::to_string(params.num_relations));
  return init_entity_embeddings(build_full_graph(kg), params);
}

VectorXd seed_distribution(int size, std::span<const int> seeds) {
  if (seeds.empty()) throw UnknownEntity("empty seed set");
  VectorXd p = VectorXd::Zero(size);
  for (int s : seeds) {
    if (s < 0 || s >= size) throw UnknownEntity("seed outside graph");
    p[s] = 1.0;
  }
  return p / p.sum();
}

// ---------------------------------------------------------------------------
// Propagation

namespace {

struct StepCache {
  MatrixXd match;       // R_aug x d
  MatrixXd aggregated;  // L x d
  MatrixXd input;       // L x 2d
  MatrixXd pre;         // L x d
  MatrixXd hidden;      // L x d
};

// U = W2 v_r per relation, R_aug x d.
MatrixXd projected_relations(const ReasonerParams& params) {
  return params.relation_emb * params.w2.transpose();
}

ReasonerState step_forward(const LocalGraph& graph, const ReasonerState& prev,
                           const VectorXd& instruction, const ReasonerParams& params,
                           const MatrixXd& projected, StepCache* cache) {
  const int d = params.hidden_dim;
  const int n = graph.size();
  if (instruction.size() != d || prev.embeddings.cols() != d || prev.embeddings.rows() != n ||
      prev.distribution.size() != n)
    throw DimensionMismatch("reasoning step inputs disagree with hidden size or graph size");

  MatrixXd match = sigmoid(
      (projected.array().rowwise() * instruction.transpose().array()).matrix());
  MatrixXd aggregated = MatrixXd::Zero(n, d);
  for (const auto& e : graph.edges) {
    double p = prev.distribution[e.from];
    if (p != 0.0) aggregated.row(e.to) += p * match.row(e.relation);
  }
  MatrixXd input(n, 2 * d);
  input << prev.embeddings, aggregated;
  MatrixXd pre = input * params.ffn_w1.transpose();
  pre.rowwise() += params.ffn_b1.col(0).transpose();
  MatrixXd hidden = pre.cwiseMax(0.0);
  ReasonerState next;
  next.embeddings = hidden * params.ffn_w2.transpose();
  next.embeddings.rowwise() += params.ffn_b2.col(0).transpose();
  next.distribution = softmax(next.embeddings * params.score.col(0));
  double total = next.distribution.sum();
  if (std::abs(total - 1.0) > 1e-8) next.distribution /= total;
  next.step = prev.step + 1;
  if (cache) {
    cache->match = std::move(match);
    cache->aggregated = std::move(aggregated);
    cache->input = std::move(input);
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return next;
}

struct RunCache {
  std::vector<ReasonerState> states;
  std::vector<StepCache> steps;
};

RunCache run_steps(const LocalGraph& graph, const MatrixXd& v0, const VectorXd& p0,
                   const std::vector<VectorXd>& instructions, const ReasonerParams& params,
                   const MatrixXd& projected) {
  RunCache run;
  run.states.push_back({v0, p0, 0});
  run.steps.resize(instructions.size());
  for (std::size_t i = 0; i < instructions.size(); ++i)
    run.states.push_back(step_forward(graph, run.states.back(), instructions[i], params,
                                      projected, &run.steps[i]));
  return run;
}

std::vector<VectorXd> ordered_instructions(const QuestionEncoding& enc, Direction direction) {
  auto out = enc.instructions;
  if (direction == Direction::backward) std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace

ReasonerState reasoning_step(const LocalGraph& graph, const ReasonerState& previous,
                             const VectorXd& instruction, const ReasonerParams& params) {
  return step_forward(graph, previous, instruction, params, projected_relations(params), nullptr);
}

EntityId ForwardTrace::argmax() const {
  const auto& p = states.back().distribution;
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return graph.entities[static_cast<std::size_t>(best)];
}

ForwardTrace forward_pass(LocalGraph graph, const QuestionEncoding& enc, std::vector<int> seeds,
                          const ReasonerParams& params, Direction direction) {
  if (seeds.empty()) throw UnknownEntity("empty seed set");
  if (enc.instructions.empty()) throw Error("question encoding has no instructions");
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  ForwardTrace trace;
  trace.direction = direction;
  trace.instructions = ordered_instructions(enc, direction);
  const MatrixXd projected = projected_relations(params);
  const MatrixXd v0 = init_entity_embeddings(graph, params);
  auto run = run_steps(graph, v0, seed_distribution(graph.size(), seeds), trace.instructions,
                       params, projected);
  trace.states = std::move(run.states);
  for (auto& s : run.steps) trace.matches.push_back(std::move(s.match));
  trace.graph = std::move(graph);
  trace.seeds = std::move(seeds);
  return trace;
}

ForwardTrace forward_pass(const KnowledgeGraph& kg, const QuestionEncoding& enc,
                          std::span<const EntityId> seeds, const ReasonerParams& params,
                          Direction direction) {
  if (seeds.empty()) throw UnknownEntity("empty seed set");
  for (auto s : seeds)
    if (!kg.valid_entity(s)) throw UnknownEntity("#" + std::to_string(s));
  if (static_cast<int>(kg.num_augmented_relations()) != params.num_relations)
    throw DimensionMismatch("parameters were built for a different relation vocabulary");
  auto graph = build_local_graph(kg, seeds, static_cast<int>(enc.instructions.size()));
  std::vector<int> local;
  for (auto s : seeds) local.push_back(graph.local_index(s));
  return forward_pass(std::move(graph), enc, std::move(local), params, direction);
}

// ---------------------------------------------------------------------------
// Loss

namespace {

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

void check_distribution(const VectorXd& p, const char* what) {
  if (p.size() == 0) throw NotNormalized(std::string(what) + " is empty");
  if (p.minCoeff() < -1e-12) throw NotNormalized(std::string(what) + " has negative entries");
  if (std::abs(p.sum() - 1.0) > 1e-6)
    throw NotNormalized(std::string(what) + " sums to " + std::to_string(p.sum()));
}

}  // namespace

double kl_divergence(const VectorXd& target, const VectorXd& p) {
  if (target.size() != p.size()) throw DimensionMismatch("KL supports differ");
  double kl = 0;
  for (Eigen::Index j = 0; j < p.size(); ++j)
    if (target[j] > 0) kl += target[j] * (safe_log(target[j]) - safe_log(p[j]));
  return kl;
}

double js_divergence(const VectorXd& p, const VectorXd& q) {
  if (p.size() != q.size()) throw DimensionMismatch("JS supports differ");
  double js = 0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    double lm = safe_log(0.5 * (p[j] + q[j]));
    if (p[j] > 0) js += 0.5 * p[j] * (safe_log(p[j]) - lm);
    if (q[j] > 0) js += 0.5 * q[j] * (safe_log(q[j]) - lm);
  }
  return js;
}

LossGradient bidirectional_loss_gradient(std::span<const VectorXd> forward,
                                         std::span<const VectorXd> backward,
                                         const VectorXd& forward_target,
                                         const VectorXd& backward_target) {
  if (forward.empty() || forward.size() != backward.size())
    throw DimensionMismatch("forward and backward sequences must be non-empty and equally long");
  const auto n = forward.size();
  const auto size = forward_target.size();
  if (backward_target.size() != size) throw DimensionMismatch("target supports differ");
  for (std::size_t i = 0; i < n; ++i) {
    if (forward[i].size() != size || backward[i].size() != size)
      throw DimensionMismatch("distribution support differs from target");
    check_distribution(forward[i], "forward distribution");
    check_distribution(backward[i], "backward distribution");
  }
  check_distribution(forward_target, "forward target");
  check_distribution(backward_target, "backward target");

  LossGradient g;
  g.d_forward.assign(n, VectorXd::Zero(size));
  g.d_backward.assign(n, VectorXd::Zero(size));

  auto kl_term = [&](const VectorXd& target, const VectorXd& p, VectorXd& dp) {
    g.loss += kl_divergence(target, p);
    for (Eigen::Index j = 0; j < size; ++j)
      if (target[j] > 0 && p[j] > kLogFloor) dp[j] -= target[j] / p[j];
  };
  kl_term(forward_target, forward[n - 1], g.d_forward[n - 1]);
  kl_term(backward_target, backward[n - 1], g.d_backward[n - 1]);

  // Pf^i pairs with Pb^{n-i}; both are 1-based step numbers.
  for (std::size_t i = 1; i < n; ++i) {
    const auto& p = forward[i - 1];
    const auto& q = backward[n - i - 1];
    g.loss += js_divergence(p, q);
    auto& dp = g.d_forward[i - 1];
    auto& dq = g.d_backward[n - i - 1];
    for (Eigen::Index j = 0; j < size; ++j) {
      double lm = safe_log(0.5 * (p[j] + q[j]));
      dp[j] += 0.5 * (safe_log(p[j]) - lm);
      dq[j] += 0.5 * (safe_log(q[j]) - lm);
    }
  }
  return g;
}

double bidirectional_loss(std::span<const VectorXd> forward, std::span<const VectorXd> backward,
                          const VectorXd& forward_target, const VectorXd& backward_target) {
  return bidirectional_loss_gradient(forward, backward, forward_target, backward_target).loss;
}

// ---------------------------------------------------------------------------
// Training

bool prepare_example(const KnowledgeGraph& kg, const QAInstance& inst, const WordVectorTable& wv,
                     int steps, Example& out, std::string* why) {
  auto fail = [&](const std::string& reason) {
    if (why) *why = reason;
    return false;
  };
  if (inst.question_entities.empty()) return fail("no linked question entity");
  if (inst.answer_entities.empty()) return fail("no linked answer entity");
  out = Example{};
  out.id = inst.id;
  out.tokens = wv.embed(inst.question);
  if (out.tokens.cols() == 0) return fail("question has no tokens");
  out.graph = build_local_graph(kg, inst.question_entities, steps);
  for (auto e : inst.question_entities) out.question.push_back(out.graph.local_index(e));
  for (auto e : inst.answer_entities) {
    int local = out.graph.local_index(e);
    if (local >= 0) out.answers.push_back(local);
  }
  if (out.answers.empty()) return fail("no answer within " + std::to_string(steps) + " hops");
  return true;
}


namespace {

struct Pass {
  EncoderTrace encoder;
  QuestionEncoding encoding;
  MatrixXd projected;
  MatrixXd sums;  // relation sums, L x d
  MatrixXd v0;
  RunCache forward, backward;
  std::vector<VectorXd> forward_instructions, backward_instructions;
  VectorXd question_dist, answer_dist;
};

Pass run_example(const Example& ex, const ReasonerParams& params, int steps) {
  Pass p;
  p.encoding = encode_traced(ex.tokens, params, steps, &p.encoder);
  p.projected = projected_relations(params);
  p.sums = relation_sums(ex.graph, params);
  p.v0 = sigmoid(p.sums * params.w1.transpose());
  p.question_dist = seed_distribution(ex.graph.size(), ex.question);
  p.answer_dist = seed_distribution(ex.graph.size(), ex.answers);
  p.forward_instructions = ordered_instructions(p.encoding, Direction::forward);
  p.backward_instructions = ordered_instructions(p.encoding, Direction::backward);
  p.forward = run_steps(ex.graph, p.v0, p.question_dist, p.forward_instructions, params,
                        p.projected);
  p.backward = run_steps(ex.graph, p.v0, p.answer_dist, p.backward_instructions, params,
                         p.projected);
  return p;
}

std::vector<VectorXd> distributions(const RunCache& run) {
  std::vector<VectorXd> out;
  for (std::size_t i = 1; i < run.states.size(); ++i) out.push_back(run.states[i].distribution);
  return out;
}

// Backpropagates one direction. d_dist[i] = dL/dP^{i+1}. Accumulates into
// grad, d_v0, d_projected and d_instr (indexed by consumption order).
void run_backward(const LocalGraph& graph, const RunCache& run, const ReasonerParams& params,
                  const MatrixXd& projected, const std::vector<VectorXd>& instructions,
                  const std::vector<VectorXd>& d_dist, ReasonerParams& grad, MatrixXd& d_v0,
                  MatrixXd& d_projected, std::vector<VectorXd>& d_instr) {
  const int d = params.hidden_dim;
  const int n = static_cast<int>(run.steps.size());
  MatrixXd d_v = MatrixXd::Zero(graph.size(), d);      // dL/dV^i from step i+1
  VectorXd d_p_carry = VectorXd::Zero(graph.size());  // dL/dP^i from step i+1
  for (int i = n; i >= 1; --i) {
    const auto& cache = run.steps[i - 1];
    const auto& state = run.states[i];
    const auto& prev = run.states[i - 1];
    VectorXd d_p = d_dist[i - 1] + d_p_carry;
    const VectorXd& p = state.distribution;
    VectorXd d_s = p.cwiseProduct((d_p.array() - d_p.dot(p)).matrix());
    d_v.noalias() += d_s * params.score.col(0).transpose();
    grad.score.col(0).noalias() += state.embeddings.transpose() * d_s;

    grad.ffn_b2.col(0) += d_v.colwise().sum().transpose();
    grad.ffn_w2.noalias() += d_v.transpose() * cache.hidden;
    MatrixXd d_pre = (d_v * params.ffn_w2)
                         .cwiseProduct((cache.pre.array() > 0.0).cast<double>().matrix());
    grad.ffn_b1.col(0) += d_pre.colwise().sum().transpose();
    grad.ffn_w1.noalias() += d_pre.transpose() * cache.input;
    MatrixXd d_input = d_pre * params.ffn_w1;

    MatrixXd d_agg = d_input.rightCols(d);
    MatrixXd d_match = MatrixXd::Zero(cache.match.rows(), d);
    d_p_carry = VectorXd::Zero(graph.size());
    for (const auto& e : graph.edges) {
      d_p_carry[e.from] += d_agg.row(e.to).dot(cache.match.row(e.relation));
      double pf = prev.distribution[e.from];
      if (pf != 0.0) d_match.row(e.relation) += pf * d_agg.row(e.to);
    }
    // m = sigmoid(omega .* U_r)
    MatrixXd d_z =
        d_match.cwiseProduct(cache.match.cwiseProduct((1.0 - cache.match.array()).matrix()));
    d_instr[i - 1] += d_z.cwiseProduct(projected).colwise().sum().transpose();
    d_projected.noalias() +=
        (d_z.array().rowwise() * instructions[i - 1].transpose().array()).matrix();
    d_v = d_input.leftCols(d);
  }
  d_v0 += d_v;
}

}  // namespace

double example_loss(const Example& ex, const ReasonerParams& params, int steps) {
  auto p = run_example(ex, params, steps);
  auto f = distributions(p.forward);
  auto b = distributions(p.backward);
  return bidirectional_loss(f, b, p.answer_dist, p.question_dist);
}

double example_gradient(const Example& ex, const ReasonerParams& params, int steps,
                        ReasonerParams& grad) {
  auto p = run_example(ex, params, steps);
  auto f = distributions(p.forward);
  auto b = distributions(p.backward);
  auto lg = bidirectional_loss_gradient(f, b, p.answer_dist, p.question_dist);

  const int d = params.hidden_dim;
  MatrixXd d_v0 = MatrixXd::Zero(ex.graph.size(), d);
  MatrixXd d_projected = MatrixXd::Zero(params.num_relations, d);
  std::vector<VectorXd> d_fwd_instr(steps, VectorXd::Zero(d));
  std::vector<VectorXd> d_bwd_instr(steps, VectorXd::Zero(d));
  run_backward(ex.graph, p.forward, params, p.projected, p.forward_instructions, lg.d_forward,
               grad, d_v0, d_projected, d_fwd_instr);
  run_backward(ex.graph, p.backward, params, p.projected, p.backward_instructions,
               lg.d_backward, grad, d_v0, d_projected, d_bwd_instr);

  // Backward consumed omega^{n+1-i} at its step i.
  std::vector<VectorXd> d_instr(steps);
  for (int i = 0; i < steps; ++i) d_instr[i] = d_fwd_instr[i] + d_bwd_instr[steps - 1 - i];

  // U = R W2^T
  grad.w2.noalias() += d_projected.transpose() * params.relation_emb;
  grad.relation_emb.noalias() += d_projected * params.w2;

  // v0 = sigmoid(S W1^T), S = C R
  MatrixXd d_z0 = d_v0.cwiseProduct(p.v0.cwiseProduct((1.0 - p.v0.array()).matrix()));
  grad.w1.noalias() += d_z0.transpose() * p.sums;
  MatrixXd d_sums = d_z0 * params.w1;
  for (const auto& c : ex.graph.relation_counts)
    grad.relation_emb.row(c.relation) += c.count * d_sums.row(c.entity);

  encoder_backward(p.encoder, params, d_instr, grad);
  return lg.loss;
}

namespace {

class Adam {
 public:
  Adam(const ReasonerParams& shape, const TrainConfig& cfg)
      : m_(shape.zeros_like()), v_(shape.zeros_like()), cfg_(cfg) {}

  void step(ReasonerParams& params, const ReasonerParams& grad) {
    ++t_;
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
    auto ps = params.tensors();
    auto gs = grad.tensors();
    auto ms = m_.tensors();
    auto vs = v_.tensors();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      auto& m = *ms[k].value;
      auto& v = *vs[k].value;
      const auto& g = *gs[k].value;
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
      ps[k].value->array() -= cfg_.learning_rate * (m.array() / c1) /
                              ((v.array() / c2).sqrt() + cfg_.adam_epsilon);
    }
  }

 private:
  ReasonerParams m_, v_;
  TrainConfig cfg_;
  int t_ = 0;
};

}  // namespace

TrainResult train(const KnowledgeGraph& kg, std::span<const QAInstance> dataset,
                  const WordVectorTable& wv, const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  TrainResult result;
  std::vector<Example> examples;
  for (const auto& inst : dataset) {
    Example ex;
    std::string why;
    if (prepare_example(kg, inst, wv, cfg.steps, ex, &why))
      examples.push_back(std::move(ex));
    else
      result.skipped.push_back(inst.id + ": " + why);
  }
  if (log)
    for (const auto& s : result.skipped) *log << "skip " << s << '\n';
  if (examples.empty()) throw EmptyDataset();
  result.used = examples.size();

  result.params = ReasonerParams::init(wv.dim(), cfg.hidden_dim,
                                       static_cast<int>(kg.num_augmented_relations()), cfg.seed,
                                       cfg.init_range);
  auto& params = result.params;
  Adam adam(params, cfg);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ReasonerParams grad = params.zeros_like();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (auto& t : grad.tensors()) t.value->setZero();
      for (auto k = start; k < end; ++k)
        epoch_loss += example_gradient(examples[order[k]], params, cfg.steps, grad);
      for (auto& t : grad.tensors()) *t.value /= static_cast<double>(end - start);
      adam.step(params, grad);
      if (!params.all_finite()) throw Error("non-finite parameters after update");
    }
    epoch_loss /= static_cast<double>(examples.size());
    result.epoch_loss.push_back(epoch_loss);
    if (log) *log << "epoch " << (epoch + 1) << " loss " << epoch_loss << '\n';
  }

  if (!cfg.checkpoint_path.empty()) {
    CheckpointMeta meta;
    meta.train = cfg;
    meta.entity_vocab_hash = vocabulary_hash(kg.entities().names());
    meta.relation_vocab_hash = vocabulary_hash(kg.relations().names());
    save_checkpoint(cfg.checkpoint_path, params, meta);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Decoding

namespace {

struct Beam {
  std::vector<int> local;  // local entity per position
  std::vector<RelationId> relations;
  double score = 1.0;
};

bool beam_before(const Beam& a, const Beam& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.local != b.local) return a.local < b.local;
  return a.relations < b.relations;
}

double edge_score(const ForwardTrace& trace, int step, int from, RelationId r) {
  return trace.states[step - 1].distribution[from] * trace.matches[step - 1].row(r).mean();
}

}  // namespace

double walk_score(const ForwardTrace& trace, const ReasoningPath& path) {
  if (static_cast<int>(path.hops()) != trace.steps()) return 0.0;
  double score = 1.0;
  int from = trace.graph.local_index(path.entities.front());
  if (from < 0) return 0.0;
  for (int i = 1; i <= trace.steps(); ++i) {
    int to = trace.graph.local_index(path.entities[i]);
    if (to < 0) return 0.0;
    score *= edge_score(trace, i, from, path.relations[i - 1]);
    from = to;
  }
  return score * trace.states.back().distribution[from];
}

PathSet decode_paths(const KnowledgeGraph& kg, const ForwardTrace& trace,
                     const DecodeOptions& opts) {
  if (trace.seeds.empty()) throw UnknownEntity("empty seed set");
  if (opts.beam <= 0) throw ConfigError("beam must be positive");
  const auto& g = trace.graph;
  const RelationId stay = kg.stay_relation();

  // Edge ranges by source; edges are sorted by (from, relation, to).
  std::vector<std::size_t> first(g.size() + 1, g.edges.size());
  for (std::size_t k = g.edges.size(); k-- > 0;) first[g.edges[k].from] = k;
  for (int u = g.size() - 1; u >= 0; --u) first[u] = std::min(first[u], first[u + 1]);

  PathSet out;
  std::vector<Beam> beams;
  for (int s : trace.seeds) beams.push_back({{s}, {}, 1.0});
  for (int step = 1; step <= trace.steps(); ++step) {
    std::vector<Beam> next;
    for (const auto& b : beams) {
      int u = b.local.back();
      for (auto k = first[u]; k < g.edges.size() && g.edges[k].from == u; ++k) {
        const auto& e = g.edges[k];
        if (e.relation == stay && !opts.allow_stay) continue;
        if (e.relation != stay &&
            std::find(b.local.begin(), b.local.end(), e.to) != b.local.end())
          continue;
        Beam nb = b;
        nb.local.push_back(e.to);
        nb.relations.push_back(e.relation);
        nb.score *= edge_score(trace, step, u, e.relation);
        next.push_back(std::move(nb));
      }
    }
    std::sort(next.begin(), next.end(), beam_before);
    if (next.size() > static_cast<std::size_t>(opts.beam)) {
      next.resize(opts.beam);
      out.complete = false;
    }
    beams = std::move(next);
  }
  for (auto& b : beams) b.score *= trace.states.back().distribution[b.local.back()];
  std::sort(beams.begin(), beams.end(), beam_before);
  for (const auto& b : beams) {
    ReasoningPath p;
    p.source = Provenance::structural;
    for (int l : b.local) p.entities.push_back(g.entities[l]);
    p.relations = b.relations;
    out.insert(std::move(p));
  }
  return out;
}

}  // namespace kgpath::structural
