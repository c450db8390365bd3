#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "odemm/attention.hpp"

using namespace odemm;
using ad::Tensor;

namespace {

Tensor rand_vec(int n, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> dist(0.0, s);
  Tensor t = Tensor::zeros({n});
  for (double& e : t.data) e = dist(rng);
  return t;
}

std::vector<double> sigmoid_vec(const std::vector<double>& x) {
  std::vector<double> out;
  for (double v : x) out.push_back(1.0 / (1.0 + std::exp(-v)));
  return out;
}

// Plain-loop evaluation of the gated update: z and r from [h||v], candidate
// from [r*h||u], blend (1-z)*h + z*tanh(...). Shares nothing with the
// autodiff implementation.
std::vector<double> mgru_oracle(const std::vector<double>& h, const std::vector<double>& v,
                                const std::vector<double>& u, const MGruParams& p) {
  const int H = static_cast<int>(h.size());
  std::vector<double> hv = h;
  hv.insert(hv.end(), v.begin(), v.end());
  auto matvec = [](const Tensor& w, const std::vector<double>& x) {
    std::vector<double> out(static_cast<size_t>(w.rows()), 0.0);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) out[static_cast<size_t>(i)] += w.at(i, j) * x[static_cast<size_t>(j)];
    return out;
  };
  auto z = sigmoid_vec(matvec(p.w_z, hv));
  auto r = sigmoid_vec(matvec(p.w_r, hv));
  std::vector<double> rh_u;
  for (int i = 0; i < H; ++i) rh_u.push_back(r[static_cast<size_t>(i)] * h[static_cast<size_t>(i)]);
  rh_u.insert(rh_u.end(), u.begin(), u.end());
  auto cand = matvec(p.w_g, rh_u);
  std::vector<double> out(static_cast<size_t>(H));
  for (int i = 0; i < H; ++i)
    out[static_cast<size_t>(i)] = (1.0 - z[static_cast<size_t>(i)]) * h[static_cast<size_t>(i)] +
                                  z[static_cast<size_t>(i)] * std::tanh(cand[static_cast<size_t>(i)]);
  return out;
}

}  // namespace

TEST_CASE("modal_attention: a single modality receives weight 1") {
  ad::Tape tape;
  ad::Binder bind(tape);
  auto params = ModalAttentionParams::init(1, 4, 3, 6, 11);
  ad::Var h = bind.constant(Tensor::vec({0.1, -0.2, 0.3}));
  ad::Var v0 = bind.constant(Tensor::vec({1.0, 2.0, 3.0, 4.0, 5.0, 6.0}));
  auto res = modal_attention(bind, h, {v0}, v0, params);
  REQUIRE(res.weights.value().numel() == 1);
  CHECK(res.weights.value().at(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(res.pooled.value().data == v0.value().data);
}

TEST_CASE("modal_attention: identical parameters and embeddings give uniform weights") {
  ad::Tape tape;
  ad::Binder bind(tape);
  auto params = ModalAttentionParams::init(1, 4, 3, 12, 5);
  params.modalities.push_back(params.modalities[0]);
  params.modalities.push_back(params.modalities[0]);

  ad::Var h = bind.constant(Tensor::vec({0.5, 0.1, -0.7}));
  Tensor e = Tensor::vec({0.2, -0.3, 0.4, 0.0});
  std::vector<ad::Var> vs{bind.constant(e), bind.constant(e), bind.constant(e)};
  std::vector<double> cat;
  for (int i = 0; i < 3; ++i) cat.insert(cat.end(), e.data.begin(), e.data.end());
  ad::Var v_concat = bind.constant(Tensor::vec(cat));

  auto res = modal_attention(bind, h, vs, v_concat, params);
  REQUIRE(res.weights.value().numel() == 3);
  for (double w : res.weights.value().data) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("modal_attention: hand-built logits (0, ln 3) give weights (0.25, 0.75)") {
  // Score widths of 1: e_m = w * tanh(W_h h + W_v v + b). Modality 0 has a
  // zero outer weight, so e_0 = 0; modality 1 uses b = 1 and w = ln3/tanh(1).
  ModalAttentionParams params;
  const int H = 2, V = 4;
  ModalAttentionParams::PerModality m0;
  m0.w = Tensor::matrix(1, 1, {0.0});
  m0.w_h = Tensor::zeros({1, H});
  m0.w_v = Tensor::zeros({1, V});
  m0.b = Tensor::zeros({1});
  ModalAttentionParams::PerModality m1 = m0;
  m1.b = Tensor::vec({1.0});
  m1.w = Tensor::matrix(1, 1, {std::log(3.0) / std::tanh(1.0)});
  params.modalities = {m0, m1};

  ad::Tape tape;
  ad::Binder bind(tape);
  ad::Var h = bind.constant(Tensor::vec({0.3, -0.3}));
  ad::Var v0 = bind.constant(Tensor::vec({1.0, 0.0}));
  ad::Var v1 = bind.constant(Tensor::vec({0.0, 2.0}));
  ad::Var v_concat = bind.constant(Tensor::vec({1.0, 0.0, 0.0, 2.0}));
  auto res = modal_attention(bind, h, {v0, v1}, v_concat, params);

  REQUIRE(res.weights.value().numel() == 2);
  CHECK(res.weights.value().at(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(res.weights.value().at(1) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(res.pooled.value().at(0) == doctest::Approx(0.25 * 1.0).epsilon(1e-12));
  CHECK(res.pooled.value().at(1) == doctest::Approx(0.75 * 2.0).epsilon(1e-12));
}

TEST_CASE("modal_attention: weights normalize and output stays in the convex hull") {
  std::mt19937_64 rng(321);
  for (int trial = 0; trial < 50; ++trial) {
    const int H = 3, D = 3, M = 3, V = 2 * D * M;
    auto params = ModalAttentionParams::init(M, 4, H, V, rng());
    ad::Tape tape;
    ad::Binder bind(tape);
    ad::Var h = bind.constant(rand_vec(H, rng));
    std::vector<ad::Var> vs;
    std::vector<double> cat;
    for (int m = 0; m < M; ++m) {
      Tensor v = rand_vec(2 * D, rng, 2.0);
      cat.insert(cat.end(), v.data.begin(), v.data.end());
      vs.push_back(bind.constant(v));
    }
    auto res = modal_attention(bind, h, vs, bind.constant(Tensor::vec(cat)), params);

    const auto& w = res.weights.value().data;
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    CHECK(std::abs(total - 1.0) <= 1e-12);
    for (double x : w) CHECK(x >= 0.0);

    for (int i = 0; i < 2 * D; ++i) {
      double lo = 1e300, hi = -1e300;
      for (int m = 0; m < M; ++m) {
        lo = std::min(lo, vs[static_cast<size_t>(m)].value().at(i));
        hi = std::max(hi, vs[static_cast<size_t>(m)].value().at(i));
      }
      CHECK(res.pooled.value().at(i) >= lo - 1e-12);
      CHECK(res.pooled.value().at(i) <= hi + 1e-12);
    }
  }
}

TEST_CASE("mgru_update: saturated-low update gate keeps the previous state") {
  const int H = 2, V = 2, U = 3;
  MGruParams p;
  // Gate logits read only the (all-positive) v part with a huge negative weight.
  p.w_z = Tensor::matrix(H, H + V, {0, 0, -1000, -1000, 0, 0, -1000, -1000});
  p.w_r = Tensor::zeros({H, H + V});
  p.w_g = MGruParams::init(H, V, U, 9).w_g;

  ad::Tape tape;
  ad::Binder bind(tape);
  ad::Var h = bind.constant(Tensor::vec({0.3, -0.4}));
  ad::Var v = bind.constant(Tensor::vec({1.0, 1.0}));
  ad::Var u = bind.constant(Tensor::vec({0.5, 0.5, 0.5}));
  ad::Var out = mgru_update(bind, h, v, u, p);
  CHECK(out.value().at(0) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(out.value().at(1) == doctest::Approx(-0.4).epsilon(1e-14));
}

TEST_CASE("mgru_update: saturated-high gates reduce to the candidate") {
  const int H = 2, V = 2, U = 3;
  MGruParams p;
  p.w_z = Tensor::matrix(H, H + V, {0, 0, 1000, 1000, 0, 0, 1000, 1000});
  p.w_r = p.w_z;
  p.w_g = Tensor::matrix(H, H + U, {0.4, -0.1, 0.2, 0.3, -0.2, 0.1, 0.5, -0.3, 0.2, 0.6});

  std::vector<double> h{0.3, -0.4}, u{0.5, -0.5, 0.25};
  ad::Tape tape;
  ad::Binder bind(tape);
  ad::Var hv = bind.constant(Tensor::vec(h));
  ad::Var v = bind.constant(Tensor::vec({1.0, 1.0}));
  ad::Var uv = bind.constant(Tensor::vec(u));
  ad::Var out = mgru_update(bind, hv, v, uv, p);

  // Expected: tanh(W_g [h || u]) with r = 1.
  std::vector<double> hu = h;
  hu.insert(hu.end(), u.begin(), u.end());
  for (int i = 0; i < H; ++i) {
    double acc = 0.0;
    for (int j = 0; j < H + U; ++j) acc += p.w_g.at(i, j) * hu[static_cast<size_t>(j)];
    CHECK(out.value().at(i) == doctest::Approx(std::tanh(acc)).epsilon(1e-14));
  }
}

TEST_CASE("mgru_update matches a scalar-loop oracle on random instances") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int H = 3, V = 4, U = 6;
    auto p = MGruParams::init(H, V, U, rng());
    Tensor h = rand_vec(H, rng), v = rand_vec(V, rng), u = rand_vec(U, rng);

    ad::Tape tape;
    ad::Binder bind(tape);
    ad::Var out = mgru_update(bind, bind.constant(h), bind.constant(v), bind.constant(u), p);
    auto expect = mgru_oracle(h.data, v.data, u.data, p);
    for (int i = 0; i < H; ++i) CHECK(out.value().at(i) == doctest::Approx(expect[static_cast<size_t>(i)]).epsilon(1e-12));

    // Convex blend: each coordinate lies between h_prev and the candidate.
    // Recover the candidate from the oracle pieces.
    for (int i = 0; i < H; ++i) {
      double lo = std::min(h.at(i), 1.0), hi = std::max(h.at(i), -1.0);
      CHECK(out.value().at(i) >= std::min(lo, out.value().at(i)));
      CHECK(out.value().at(i) <= std::max(hi, out.value().at(i)));
    }
  }
}

TEST_CASE("mgru_update gate kind: zero logits behave differently per kind") {
  const int H = 1, V = 1, U = 1;
  MGruParams p;
  p.w_z = Tensor::zeros({H, H + V});
  p.w_r = Tensor::zeros({H, H + V});
  p.w_g = Tensor::matrix(1, 2, {0.0, 1.0});

  ad::Tape tape;
  ad::Binder bind(tape);
  ad::Var h = bind.constant(Tensor::vec({0.8}));
  ad::Var v = bind.constant(Tensor::vec({0.0}));
  ad::Var u = bind.constant(Tensor::vec({0.5}));

  // tanh(0) = 0: the update gate closes entirely.
  ad::Var keep = mgru_update(bind, h, v, u, p, GateKind::tanh_gate);
  CHECK(keep.value().at(0) == doctest::Approx(0.8).epsilon(1e-14));

  // logistic(0) = 1/2: halfway blend with the candidate tanh(0.5).
  ad::Var blend = mgru_update(bind, h, v, u, p, GateKind::logistic);
  CHECK(blend.value().at(0) == doctest::Approx(0.5 * 0.8 + 0.5 * std::tanh(0.5)).epsilon(1e-14));
}

TEST_CASE("temporal_self_attention: single step gets weight 1") {
  ad::Tape tape;
  ad::Binder bind(tape);
  auto params = TemporalAttentionParams::init(4, 5, 13);
  ad::Var v = bind.constant(Tensor::vec({1.0, -1.0, 2.0, 0.0, 0.5}));
  auto res = temporal_self_attention(bind, {v}, params);
  CHECK(res.weights.value().at(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(res.pooled.value().data == v.value().data);
}

TEST_CASE("temporal_self_attention: identical steps give uniform weights") {
  ad::Tape tape;
  ad::Binder bind(tape);
  auto params = TemporalAttentionParams::init(4, 3, 29);
  Tensor v = Tensor::vec({0.4, -0.2, 0.9});
  std::vector<ad::Var> steps{bind.constant(v), bind.constant(v), bind.constant(v), bind.constant(v)};
  auto res = temporal_self_attention(bind, steps, params);
  for (double w : res.weights.value().data) CHECK(w == doctest::Approx(0.25).epsilon(1e-14));
  for (int i = 0; i < v.numel(); ++i)
    CHECK(res.pooled.value().at(i) == doctest::Approx(v.at(i)).epsilon(1e-12));
}

TEST_CASE("temporal_self_attention: hand-built logits (0, ln 3)") {
  TemporalAttentionParams params;
  params.w = Tensor::matrix(1, 1, {std::log(3.0) / std::tanh(1.0)});
  params.w_mat = Tensor::matrix(1, 2, {1.0, 0.0});  // score reads the first coordinate

  ad::Tape tape;
  ad::Binder bind(tape);
  ad::Var v0 = bind.constant(Tensor::vec({0.0, 4.0}));
  ad::Var v1 = bind.constant(Tensor::vec({1.0, -2.0}));
  auto res = temporal_self_attention(bind, {v0, v1}, params);

  CHECK(res.weights.value().at(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(res.weights.value().at(1) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(res.pooled.value().at(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(res.pooled.value().at(1) == doctest::Approx(0.25 * 4.0 + 0.75 * -2.0).epsilon(1e-12));
}

TEST_CASE("temporal_self_attention is permutation-covariant") {
  std::mt19937_64 rng(55);
  const int T = 5, V = 4;
  auto params = TemporalAttentionParams::init(3, V, 91);
  std::vector<Tensor> vs;
  for (int t = 0; t < T; ++t) vs.push_back(rand_vec(V, rng));

  auto run = [&](const std::vector<int>& order) {
    ad::Tape tape;
    ad::Binder bind(tape);
    std::vector<ad::Var> steps;
    for (int idx : order) steps.push_back(bind.constant(vs[static_cast<size_t>(idx)]));
    auto res = temporal_self_attention(bind, steps, params);
    return std::make_pair(res.pooled.value(), res.weights.value());
  };

  std::vector<int> identity{0, 1, 2, 3, 4};
  auto [pool_a, w_a] = run(identity);
  std::vector<int> perm{3, 0, 4, 2, 1};
  auto [pool_b, w_b] = run(perm);

  for (int i = 0; i < T; ++i)
    CHECK(w_b.at(i) == doctest::Approx(w_a.at(perm[static_cast<size_t>(i)])).epsilon(1e-12));
  for (int i = 0; i < V; ++i) CHECK(pool_b.at(i) == doctest::Approx(pool_a.at(i)).epsilon(1e-12));
}

TEST_CASE("gradients through both mechanisms match finite differences") {
  const int H = 3, D = 2, M = 3, V = 2 * D * M;
  auto mparams = ModalAttentionParams::init(M, 4, H, V, 17);
  auto gparams = MGruParams::init(H, V, V + 2 * D, 19);
  Tensor x = Tensor::zeros({H + V});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist(0.0, 0.7);
  for (double& e : x.data) e = dist(rng);

  auto fwd = [&](ad::Tape& tape, ad::Var in) {
    ad::Binder bind(tape);
    ad::Var h = ad::slice(in, 0, 0, H);
    ad::Var v_concat = ad::slice(in, 0, H, H + V);
    std::vector<ad::Var> vs;
    for (int m = 0; m < M; ++m) vs.push_back(ad::slice(v_concat, 0, m * 2 * D, (m + 1) * 2 * D));
    auto res = modal_attention(bind, h, vs, v_concat, mparams);
    ad::Var u_t = ad::concat({v_concat, res.pooled}, 0);
    return ad::sum(mgru_update(bind, h, v_concat, u_t, gparams));
  };
  CHECK(ad::grad_check(fwd, x, 1e-5) < 1e-6);

  auto tparams = TemporalAttentionParams::init(3, 4, 23);
  Tensor steps = Tensor::zeros({12});
  for (double& e : steps.data) e = dist(rng);
  auto fwd_t = [&](ad::Tape& tape, ad::Var in) {
    ad::Binder bind(tape);
    std::vector<ad::Var> vs;
    for (int t = 0; t < 3; ++t) vs.push_back(ad::slice(in, 0, t * 4, (t + 1) * 4));
    return ad::sum(temporal_self_attention(bind, vs, tparams).pooled);
  };
  CHECK(ad::grad_check(fwd_t, steps, 1e-5) < 1e-6);
}
