#pragma once

// Structural reasoning over the knowledge graph.
//
// A question is encoded by an LSTM into v_q; an LSTM decoder started from the
// encoder state emits one instruction vector per reasoning step. Entities are
// represented only through the relations they touch. Each step matches the
// current instruction against every relation embedding, pushes probability
// mass along the matching edges, updates entity embeddings with a two-layer
// FFN and re-scores entities with a softmax.
//
// Training runs the walk twice: forward from the question entities and
// backward from the answer entities with the instructions reversed. The loss
// pulls both final distributions to their targets and the intermediate
// forward/backward distributions toward each other (Jensen-Shannon).
//
// Conventions (all tensors are row-major in meaning, column vectors in code):
//   relation_emb  R_aug x d    row r is v_r
//   v_e^0       = sigmoid(W1 * sum_{(e,r,e') in G} v_r)
//   m_r^i       = sigmoid(omega^i .* (W2 * v_r))
//   tilde v_e^i = sum over edges (e' -r-> e) of P^{i-1}_{e'} * m_r^i
//   v_e^i       = F2 * relu(F1 * [v_e^{i-1}; tilde v_e^i] + b1) + b2
//   P^i         = softmax_e(score . v_e^i)

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kgpath/kg_store.hpp"
#include "kgpath/word_vectors.hpp"

namespace kgpath::structural {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct TrainConfig {
  int epochs = 80;
  int batch_size = 40;
  double learning_rate = 4e-4;
  int steps = 2;  // n; 2 for simple questions, 4 for complex ones
  int hidden_dim = 100;
  std::uint64_t seed = 7;
  double init_range = 0.4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Written after training when non-empty.
  std::string checkpoint_path;

  // Throws ConfigError for non-positive fields.
  void validate() const;
};

struct LstmWeights {
  MatrixXd input;      // 4d x d_in, gate order i, f, g, o
  MatrixXd recurrent;  // 4d x d
  MatrixXd bias;       // 4d x 1
};

struct NamedTensor {
  std::string name;
  MatrixXd* value;
};
struct ConstNamedTensor {
  std::string name;
  const MatrixXd* value;
};

struct ReasonerParams {
  int word_dim = 0;
  int hidden_dim = 0;
  int num_relations = 0;  // augmented count: base + inverse + stay

  MatrixXd relation_emb;  // R_aug x d
  MatrixXd w1;            // d x d
  MatrixXd w2;            // d x d
  MatrixXd ffn_w1;        // d x 2d
  MatrixXd ffn_b1;        // d x 1
  MatrixXd ffn_w2;        // d x d
  MatrixXd ffn_b2;        // d x 1
  MatrixXd score;         // d x 1
  LstmWeights encoder;    // d_w -> d
  LstmWeights decoder;    // d -> d

  // uniform(-range, range) from a fixed seed.
  static ReasonerParams init(int word_dim, int hidden_dim, int num_relations,
                             std::uint64_t seed, double range = 0.4);
  // Same shapes, all zeros.
  ReasonerParams zeros_like() const;

  std::vector<NamedTensor> tensors();
  std::vector<ConstNamedTensor> tensors() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
  // Throws DimensionMismatch when tensor shapes disagree with each other.
  void check_shapes() const;
};

struct QuestionEncoding {
  VectorXd question;                  // v_q, final encoder hidden state
  std::vector<VectorXd> instructions;  // omega^1..omega^n
};

// Throws Error for a question with no tokens and DimensionMismatch when the
// word vectors do not match the encoder input width.
QuestionEncoding encode_question(std::string_view question, const WordVectorTable& wv,
                                 const ReasonerParams& params, int steps);
// Encoder only, from pre-looked-up token columns (d_w x T).
VectorXd encode_tokens(const MatrixXd& tokens, const ReasonerParams& params);

// Entities reachable within a hop bound of a seed set, with every augmented
// edge among them plus one stay edge per entity. Local index order follows
// global entity ids.
struct LocalGraph {
  struct LocalEdge {
    int from = 0;
    RelationId relation = 0;
    int to = 0;
  };
  std::vector<EntityId> entities;
  std::vector<LocalEdge> edges;
  // Sparse relation counts used for v^0: (local entity, relation, count).
  struct Count {
    int entity = 0;
    RelationId relation = 0;
    double count = 0;
  };
  std::vector<Count> relation_counts;

  int size() const { return static_cast<int>(entities.size()); }
  // -1 when the entity is outside the graph.
  int local_index(EntityId e) const;
};

LocalGraph build_local_graph(const KnowledgeGraph& kg, std::span<const EntityId> seeds, int hops);
LocalGraph build_full_graph(const KnowledgeGraph& kg);

// v^0 for every entity of the knowledge graph (|E| x d).
MatrixXd init_entity_embeddings(const KnowledgeGraph& kg, const ReasonerParams& params);
// v^0 rows for the entities of a local graph.
MatrixXd init_entity_embeddings(const LocalGraph& graph, const ReasonerParams& params);

struct ReasonerState {
  MatrixXd embeddings;  // L x d, row per local entity
  VectorXd distribution;  // L
  int step = 0;
};

// Uniform over the given local indices.
VectorXd seed_distribution(int size, std::span<const int> seeds);

// One propagation step. Pure: the input state is not touched.
ReasonerState reasoning_step(const LocalGraph& graph, const ReasonerState& previous,
                             const VectorXd& instruction, const ReasonerParams& params);

struct ForwardTrace {
  LocalGraph graph;
  Direction direction = Direction::forward;
  std::vector<int> seeds;               // local indices
  std::vector<VectorXd> instructions;   // in the order they were consumed
  std::vector<ReasonerState> states;    // states[0] = initial, states[i] = after step i
  std::vector<MatrixXd> matches;        // matches[i-1] = m^i, R_aug x d

  int steps() const { return static_cast<int>(states.size()) - 1; }
  const VectorXd& distribution(int step) const { return states.at(step).distribution; }
  // Highest-probability entity after the last step (lowest id on ties).
  EntityId argmax() const;
};

// Runs n steps from a uniform distribution over `seeds`. Backward direction
// consumes the instructions in reverse order; both directions use the
// inverse-augmented adjacency. Throws UnknownEntity for empty or invalid seeds.
ForwardTrace forward_pass(const KnowledgeGraph& kg, const QuestionEncoding& enc,
                          std::span<const EntityId> seeds, const ReasonerParams& params,
                          Direction direction);
ForwardTrace forward_pass(LocalGraph graph, const QuestionEncoding& enc,
                          std::vector<int> seeds, const ReasonerParams& params,
                          Direction direction);

// Floor applied inside every log.
inline constexpr double kLogFloor = 1e-12;

// KL(target || p); target first.
double kl_divergence(const VectorXd& target, const VectorXd& p);
double js_divergence(const VectorXd& p, const VectorXd& q);

// KL(Pf* || Pf^n) + KL(Pb* || Pb^n) + sum_{i=1}^{n-1} JS(Pf^i, Pb^{n-i}).
// Sequences hold P^1..P^n. Throws NotNormalized / DimensionMismatch.
double bidirectional_loss(std::span<const VectorXd> forward, std::span<const VectorXd> backward,
                          const VectorXd& forward_target, const VectorXd& backward_target);

struct LossGradient {
  double loss = 0;
  std::vector<VectorXd> d_forward;   // dL/dPf^i, i = 1..n
  std::vector<VectorXd> d_backward;  // dL/dPb^i
};
LossGradient bidirectional_loss_gradient(std::span<const VectorXd> forward,
                                         std::span<const VectorXd> backward,
                                         const VectorXd& forward_target,
                                         const VectorXd& backward_target);

// One prepared training question.
struct Example {
  std::string id;
  LocalGraph graph;
  MatrixXd tokens;  // d_w x T
  std::vector<int> question;  // local indices
  std::vector<int> answers;   // local indices inside the graph
};

// False when the instance cannot be used: no linked entities, no tokens, or
// no answer within `steps` hops. The reason goes to `why`.
bool prepare_example(const KnowledgeGraph& kg, const QAInstance& inst, const WordVectorTable& wv,
                     int steps, Example& out, std::string* why = nullptr);

double example_loss(const Example& ex, const ReasonerParams& params, int steps);
// Adds dL/dparams into `grad` and returns the loss.
double example_gradient(const Example& ex, const ReasonerParams& params, int steps,
                        ReasonerParams& grad);

struct TrainResult {
  ReasonerParams params;
  std::vector<double> epoch_loss;  // mean over used instances
  std::vector<std::string> skipped;  // "id: reason"
  std::size_t used = 0;
};

// Mini-batch Adam on the bidirectional loss. Throws EmptyDataset when no
// instance is usable. Progress lines go to `log` when given.
TrainResult train(const KnowledgeGraph& kg, std::span<const QAInstance> dataset,
                  const WordVectorTable& wv, const TrainConfig& cfg, std::ostream* log = nullptr);

struct DecodeOptions {
  int beam = 5;
  // Walks may pad with `__stay__`; other revisits of an entity are pruned.
  bool allow_stay = true;
};

// Beam search over grounded edges. A step-i edge from e with relation r scores
// P^{i-1}_e * mean(m_r^i); the walk score is the product of its edge scores
// times P^n at the terminal entity. Returns paths of exactly n hops.
PathSet decode_paths(const KnowledgeGraph& kg, const ForwardTrace& trace,
                     const DecodeOptions& opts = {});
// Score of one grounded walk under the rule above.
double walk_score(const ForwardTrace& trace, const ReasoningPath& path);

}  // namespace kgpath::structural
