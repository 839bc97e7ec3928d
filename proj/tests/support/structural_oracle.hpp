#pragma once

// Loop-by-loop reference for one propagation step, written directly from the
// model equations and reading the KG triples rather than the local graph.

#include <cmath>
#include <vector>

#include "kgpath/kg_store.hpp"
#include "kgpath/structural_reasoner.hpp"

namespace kgpath::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// v_e^0 for every entity of kg.
inline Mat initial_embeddings(const KnowledgeGraph& kg, const structural::ReasonerParams& p) {
  const int d = p.hidden_dim;
  Mat v(kg.num_entities(), Vec(d, 0.0));
  for (EntityId e = 0; e < kg.num_entities(); ++e) {
    Vec sum(d, 0.0);
    for (const auto& t : kg.triples()) {
      if (t.head == e)
        for (int k = 0; k < d; ++k) sum[k] += p.relation_emb(t.relation, k);
      if (t.tail == e)
        for (int k = 0; k < d; ++k) sum[k] += p.relation_emb(kg.inverse(t.relation), k);
    }
    for (int a = 0; a < d; ++a) {
      double z = 0;
      for (int b = 0; b < d; ++b) z += p.w1(a, b) * sum[b];
      v[e][a] = logistic(z);
    }
  }
  return v;
}

struct StepResult {
  Mat embeddings;
  Vec distribution;
};

inline StepResult step(const KnowledgeGraph& kg, const Mat& prev_v, const Vec& prev_p,
                       const Vec& omega, const structural::ReasonerParams& p) {
  const int d = p.hidden_dim;
  const std::size_t n = kg.num_entities();
  auto match = [&](RelationId r) {
    Vec m(d);
    for (int a = 0; a < d; ++a) {
      double z = 0;
      for (int b = 0; b < d; ++b) z += p.w2(a, b) * p.relation_emb(r, b);
      m[a] = logistic(omega[a] * z);
    }
    return m;
  };
  Mat agg(n, Vec(d, 0.0));
  auto push = [&](EntityId from, RelationId r, EntityId to) {
    auto m = match(r);
    for (int a = 0; a < d; ++a) agg[to][a] += prev_p[from] * m[a];
  };
  for (const auto& t : kg.triples()) {
    push(t.head, t.relation, t.tail);
    push(t.tail, kg.inverse(t.relation), t.head);
  }
  for (EntityId e = 0; e < n; ++e) push(e, kg.stay_relation(), e);

  StepResult out;
  out.embeddings.assign(n, Vec(d, 0.0));
  Vec scores(n);
  for (EntityId e = 0; e < n; ++e) {
    Vec x(prev_v[e]);
    x.insert(x.end(), agg[e].begin(), agg[e].end());
    Vec h(d);
    for (int a = 0; a < d; ++a) {
      double z = p.ffn_b1(a, 0);
      for (int b = 0; b < 2 * d; ++b) z += p.ffn_w1(a, b) * x[b];
      h[a] = z > 0 ? z : 0;
    }
    double s = 0;
    for (int a = 0; a < d; ++a) {
      double z = p.ffn_b2(a, 0);
      for (int b = 0; b < d; ++b) z += p.ffn_w2(a, b) * h[b];
      out.embeddings[e][a] = z;
      s += z * p.score(a, 0);
    }
    scores[e] = s;
  }
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double total = 0;
  for (double& s : scores) total += (s = std::exp(s - mx));
  for (double& s : scores) s /= total;
  out.distribution = scores;
  return out;
}

inline Vec lstm_cell(const structural::LstmWeights& w, const Vec& x, Vec& h, Vec& c) {
  const std::size_t d = h.size();
  Vec z(4 * d);
  for (std::size_t r = 0; r < 4 * d; ++r) {
    z[r] = w.bias(r, 0);
    for (std::size_t k = 0; k < x.size(); ++k) z[r] += w.input(r, k) * x[k];
    for (std::size_t k = 0; k < d; ++k) z[r] += w.recurrent(r, k) * h[k];
  }
  for (std::size_t k = 0; k < d; ++k) {
    double i = logistic(z[k]), f = logistic(z[d + k]), g = std::tanh(z[2 * d + k]),
           o = logistic(z[3 * d + k]);
    c[k] = f * c[k] + i * g;
    h[k] = o * std::tanh(c[k]);
  }
  return h;
}

}  // namespace kgpath::oracle
