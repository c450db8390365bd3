#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "odemm/tensor.hpp"

namespace odemm {

enum class GateKind { logistic, tanh_gate };

// Additive (tanh) scoring of each modality against the incoming hidden state.
struct ModalAttentionParams {
  struct PerModality {
    ad::Tensor w;    // (A)
    ad::Tensor w_h;  // (A x H)
    ad::Tensor w_v;  // (A x V_total), scores see the full concatenated observation
    ad::Tensor b;    // (A)
  };
  std::vector<PerModality> modalities;

  static ModalAttentionParams init(int n_modalities, int attn_width, int hidden, int v_total,
                                   uint64_t seed);
};

// GRU gates over [h || v_t], candidate over [r*h || u_t].
struct MGruParams {
  ad::Tensor w_z;  // (H x (H + V_in))
  ad::Tensor w_r;  // (H x (H + V_in))
  ad::Tensor w_g;  // (H x (H + U))

  static MGruParams init(int hidden, int v_in, int u_width, uint64_t seed);
};

struct TemporalAttentionParams {
  ad::Tensor w;      // (A')
  ad::Tensor w_mat;  // (A' x V_total)

  static TemporalAttentionParams init(int attn_width, int v_total, uint64_t seed);
};

struct AttentionResult {
  ad::Var pooled;
  ad::Var weights;  // softmax-normalized, one entry per input
};

// e_m = w_m^T tanh(W_hm h + W_vm v_concat + b_m); a = softmax(e);
// u' = sum_m a_m v_m.
AttentionResult modal_attention(ad::Binder& bind, ad::Var h_prev,
                                const std::vector<ad::Var>& modal_embeddings, ad::Var v_concat,
                                const ModalAttentionParams& params);

ad::Var mgru_update(ad::Binder& bind, ad::Var h_prev, ad::Var v_t, ad::Var u_t,
                    const MGruParams& params, GateKind gate = GateKind::logistic);

// a_t = softmax_t(w^T tanh(W v_t)); h = sum_t a_t v_t.
AttentionResult temporal_self_attention(ad::Binder& bind, const std::vector<ad::Var>& step_embeddings,
                                        const TemporalAttentionParams& params);

}  // namespace odemm
