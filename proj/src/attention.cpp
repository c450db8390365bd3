#include "odemm/attention.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace odemm {

using ad::Binder;
using ad::Tensor;
using ad::Var;

namespace {

Tensor rand_tensor(std::vector<int> shape, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor t = Tensor::zeros(shape);
  for (double& e : t.data) e = dist(rng);
  return t;
}

// Expands a length-1 vector to length n via matmul with a ones column.
Var broadcast_scalar(Binder& bind, Var one_vec, int n) {
  Tensor ones = Tensor::zeros({n, 1});
  for (double& e : ones.data) e = 1.0;
  return ad::matmul(bind.constant(std::move(ones)), one_vec);
}

}  // namespace

ModalAttentionParams ModalAttentionParams::init(int n_modalities, int attn_width, int hidden,
                                                int v_total, uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModalAttentionParams p;
  for (int m = 0; m < n_modalities; ++m) {
    PerModality pm;
    pm.w = rand_tensor({1, attn_width}, 1.0 / std::sqrt(attn_width), rng);
    pm.w_h = rand_tensor({attn_width, hidden}, 1.0 / std::sqrt(hidden), rng);
    pm.w_v = rand_tensor({attn_width, v_total}, 1.0 / std::sqrt(v_total), rng);
    pm.b = Tensor::zeros({attn_width});
    p.modalities.push_back(std::move(pm));
  }
  return p;
}

MGruParams MGruParams::init(int hidden, int v_in, int u_width, uint64_t seed) {
  std::mt19937_64 rng(seed);
  MGruParams p;
  p.w_z = rand_tensor({hidden, hidden + v_in}, 1.0 / std::sqrt(hidden + v_in), rng);
  p.w_r = rand_tensor({hidden, hidden + v_in}, 1.0 / std::sqrt(hidden + v_in), rng);
  p.w_g = rand_tensor({hidden, hidden + u_width}, 1.0 / std::sqrt(hidden + u_width), rng);
  return p;
}

TemporalAttentionParams TemporalAttentionParams::init(int attn_width, int v_total, uint64_t seed) {
  std::mt19937_64 rng(seed);
  TemporalAttentionParams p;
  p.w = rand_tensor({1, attn_width}, 1.0 / std::sqrt(attn_width), rng);
  p.w_mat = rand_tensor({attn_width, v_total}, 1.0 / std::sqrt(v_total), rng);
  return p;
}

AttentionResult modal_attention(Binder& bind, Var h_prev, const std::vector<Var>& modal_embeddings,
                                Var v_concat, const ModalAttentionParams& params) {
  const size_t m_count = modal_embeddings.size();
  if (m_count == 0) throw std::invalid_argument("modal_attention: no modalities");
  if (params.modalities.size() != m_count)
    throw std::invalid_argument("modal_attention: parameter count does not match modality count");

  std::vector<Var> scores;
  for (size_t m = 0; m < m_count; ++m) {
    const auto& pm = params.modalities[m];
    Var pre = ad::add(ad::add(ad::matmul(bind(pm.w_h), h_prev), ad::matmul(bind(pm.w_v), v_concat)),
                      bind(pm.b));
    scores.push_back(ad::matmul(bind(pm.w), ad::tanh(pre)));  // length-1 vector
  }
  Var logits = m_count == 1 ? scores[0] : ad::concat(scores, 0);
  Var weights = ad::softmax(logits);

  Var pooled;
  const int width = modal_embeddings[0].value().shape[0];
  for (size_t m = 0; m < m_count; ++m) {
    Var a_m = ad::slice(weights, 0, static_cast<int>(m), static_cast<int>(m) + 1);
    Var term = ad::mul(modal_embeddings[m], broadcast_scalar(bind, a_m, width));
    pooled = (m == 0) ? term : ad::add(pooled, term);
  }
  return AttentionResult{pooled, weights};
}

Var mgru_update(Binder& bind, Var h_prev, Var v_t, Var u_t, const MGruParams& params, GateKind gate) {
  auto apply_gate = [gate](Var x) { return gate == GateKind::logistic ? ad::sigmoid(x) : ad::tanh(x); };
  Var hv = ad::concat({h_prev, v_t}, 0);
  Var z = apply_gate(ad::matmul(bind(params.w_z), hv));
  Var r = apply_gate(ad::matmul(bind(params.w_r), hv));
  Var candidate = ad::tanh(ad::matmul(bind(params.w_g), ad::concat({ad::mul(r, h_prev), u_t}, 0)));

  const int hidden = h_prev.value().shape[0];
  Tensor ones = Tensor::zeros({hidden});
  for (double& e : ones.data) e = 1.0;
  Var one_minus_z = ad::sub(bind.constant(std::move(ones)), z);
  return ad::add(ad::mul(one_minus_z, h_prev), ad::mul(z, candidate));
}

AttentionResult temporal_self_attention(Binder& bind, const std::vector<Var>& step_embeddings,
                                        const TemporalAttentionParams& params) {
  const size_t t_count = step_embeddings.size();
  if (t_count == 0) throw std::invalid_argument("temporal_self_attention: no steps");

  std::vector<Var> scores;
  for (const Var& v : step_embeddings)
    scores.push_back(ad::matmul(bind(params.w), ad::tanh(ad::matmul(bind(params.w_mat), v))));
  Var logits = t_count == 1 ? scores[0] : ad::concat(scores, 0);
  Var weights = ad::softmax(logits);

  Var pooled;
  const int width = step_embeddings[0].value().shape[0];
  for (size_t t = 0; t < t_count; ++t) {
    Var a_t = ad::slice(weights, 0, static_cast<int>(t), static_cast<int>(t) + 1);
    Var term = ad::mul(step_embeddings[t], broadcast_scalar(bind, a_t, width));
    pooled = (t == 0) ? term : ad::add(pooled, term);
  }
  return AttentionResult{pooled, weights};
}

}  // namespace odemm
