#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "odemm/tensor.hpp"

namespace odemm {

// Two-layer MLP dynamics, f: R^H -> R^H, time-autonomous.
struct OdeFuncParams {
  ad::Tensor w1;  // (H_f x H)
  ad::Tensor b1;  // (H_f)
  ad::Tensor w2;  // (H x H_f)
  ad::Tensor b2;  // (H)

  static OdeFuncParams init(int hidden, int width, uint64_t seed);
};

enum class SolverMethod { euler, rk4 };

struct SolverConfig {
  SolverMethod method = SolverMethod::rk4;
  double step_cap = 0.05;  // in normalized time units
  int max_steps_per_interval = 20;

  int steps_for(double t0, double t1) const;
};

// W2·tanh(W1·h + b1) + b2
ad::Var ode_func(ad::Binder& bind, ad::Var h, const OdeFuncParams& params);

// Fixed-step integration, differentiable through the unrolled steps.
// t1 == t0 returns h0 unchanged.
ad::Var ode_solve(ad::Var h0, double t0, double t1, const std::function<ad::Var(ad::Var)>& f,
                  SolverMethod method, int n_steps);

// ODE-RNN encode loop: between observations the state drifts under f, at each
// observation `update` folds the observation in. Returns every post-update state.
std::vector<ad::Var> ode_rnn_encode(ad::Var h0, const std::vector<double>& times,
                                    const std::function<ad::Var(ad::Var)>& f,
                                    const SolverConfig& solver,
                                    const std::function<ad::Var(ad::Var, int)>& update);

}  // namespace odemm
