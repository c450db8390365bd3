#include "odemm/ode.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace odemm {

using ad::Binder;
using ad::Tensor;
using ad::Var;

OdeFuncParams OdeFuncParams::init(int hidden, int width, uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto rand_mat = [&](int r, int c, double scale) {
    std::normal_distribution<double> dist(0.0, scale);
    Tensor t = Tensor::zeros({r, c});
    for (double& e : t.data) e = dist(rng);
    return t;
  };
  OdeFuncParams p;
  p.w1 = rand_mat(width, hidden, 1.0 / std::sqrt(hidden));
  p.b1 = Tensor::zeros({width});
  p.w2 = rand_mat(hidden, width, 1.0 / std::sqrt(width));
  p.b2 = Tensor::zeros({hidden});
  return p;
}

int SolverConfig::steps_for(double t0, double t1) const {
  double span = t1 - t0;
  if (span <= 0.0) return 0;
  int n = static_cast<int>(std::ceil(span / step_cap));
  return std::clamp(n, 1, max_steps_per_interval);
}

Var ode_func(Binder& bind, Var h, const OdeFuncParams& params) {
  Var hidden = ad::tanh(ad::add(ad::matmul(bind(params.w1), h), bind(params.b1)));
  return ad::add(ad::matmul(bind(params.w2), hidden), bind(params.b2));
}

Var ode_solve(Var h0, double t0, double t1, const std::function<Var(Var)>& f,
              SolverMethod method, int n_steps) {
  if (t1 < t0) throw std::invalid_argument("ode_solve: t1 < t0");
  if (t1 == t0) return h0;
  if (n_steps < 1) throw std::invalid_argument("ode_solve: n_steps must be >= 1");
  const double dt = (t1 - t0) / n_steps;
  Var h = h0;
  for (int step = 0; step < n_steps; ++step) {
    try {
      if (method == SolverMethod::euler) {
        h = ad::add(h, ad::scale(f(h), dt));
      } else {
        Var k1 = f(h);
        Var k2 = f(ad::add(h, ad::scale(k1, dt / 2.0)));
        Var k3 = f(ad::add(h, ad::scale(k2, dt / 2.0)));
        Var k4 = f(ad::add(h, ad::scale(k3, dt)));
        Var incr = ad::add(ad::add(k1, ad::scale(k2, 2.0)), ad::add(ad::scale(k3, 2.0), k4));
        h = ad::add(h, ad::scale(incr, dt / 6.0));
      }
    } catch (const ad::numeric_error& e) {
      throw ad::numeric_error("ode_solve: step " + std::to_string(step) + ": " + e.what());
    }
    if (!h.value().all_finite())
      throw ad::numeric_error("ode_solve: non-finite state at step " + std::to_string(step));
  }
  return h;
}

std::vector<Var> ode_rnn_encode(Var h0, const std::vector<double>& times,
                                const std::function<Var(Var)>& f, const SolverConfig& solver,
                                const std::function<Var(Var, int)>& update) {
  if (times.empty()) throw std::invalid_argument("ode_rnn_encode: no observations");
  for (size_t i = 1; i < times.size(); ++i)
    if (times[i] <= times[i - 1])
      throw std::invalid_argument("ode_rnn_encode: observation times must strictly increase");

  std::vector<Var> states;
  Var h = h0;
  double t_prev = times[0];
  for (size_t i = 0; i < times.size(); ++i) {
    double t = times[i];
    if (t > t_prev) h = ode_solve(h, t_prev, t, f, solver.method, solver.steps_for(t_prev, t));
    h = update(h, static_cast<int>(i));
    states.push_back(h);
    t_prev = t;
  }
  return states;
}

}  // namespace odemm
