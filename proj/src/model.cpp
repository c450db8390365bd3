#include "odemm/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "odemm/config_json.hpp"

namespace odemm {

using ad::Binder;
using ad::Tensor;
using ad::Var;
using nlohmann::json;

namespace {

constexpr std::array<const char*, 3> kModalityNames = {"walking", "tapping", "memory"};
constexpr std::array<int, 3> kModalityChannels = {3, 3, 4};

std::vector<std::pair<std::string, ad::Tensor*>> param_refs(ModelParams& p) {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  auto add = [&](std::string n, ad::Tensor& t) { out.emplace_back(std::move(n), &t); };
  for (int m = 0; m < 3; ++m) {
    std::string base = std::string("tcn.") + kModalityNames[static_cast<size_t>(m)];
    auto& tcn = p.tcn[static_cast<size_t>(m)];
    for (size_t l = 0; l < tcn.layers.size(); ++l) {
      auto& layer = tcn.layers[l];
      for (size_t k = 0; k < layer.taps.size(); ++k)
        add(base + ".layer" + std::to_string(l) + ".tap" + std::to_string(k), layer.taps[k]);
      add(base + ".layer" + std::to_string(l) + ".bias", layer.bias);
      if (layer.residual_proj)
        add(base + ".layer" + std::to_string(l) + ".residual_proj", *layer.residual_proj);
    }
    add(base + ".proj_w", tcn.proj_w);
    add(base + ".proj_b", tcn.proj_b);
  }
  add("ode.w1", p.ode.w1);
  add("ode.b1", p.ode.b1);
  add("ode.w2", p.ode.w2);
  add("ode.b2", p.ode.b2);
  for (size_t m = 0; m < p.modal_attn.modalities.size(); ++m) {
    std::string base = std::string("modal_attn.") + kModalityNames[m];
    auto& pm = p.modal_attn.modalities[m];
    add(base + ".w", pm.w);
    add(base + ".w_h", pm.w_h);
    add(base + ".w_v", pm.w_v);
    add(base + ".b", pm.b);
  }
  add("mgru.w_z", p.mgru.w_z);
  add("mgru.w_r", p.mgru.w_r);
  add("mgru.w_g", p.mgru.w_g);
  add("temporal_attn.w", p.temporal_attn.w);
  add("temporal_attn.w_mat", p.temporal_attn.w_mat);
  add("head.w", p.head_w);
  add("head.b", p.head_b);
  add("h0", p.h0);
  return out;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, uint64_t seed) {
  ModelParams p;
  p.config = cfg;
  std::mt19937_64 seeder(seed);
  auto next = [&] { return seeder(); };
  for (int m = 0; m < 3; ++m)
    p.tcn[static_cast<size_t>(m)] = TcnParams::init(kModalityChannels[static_cast<size_t>(m)],
                                                    cfg.tcn_channels, cfg.tcn_layers, cfg.tcn_kernel,
                                                    cfg.embed_dim, next());
  p.ode = OdeFuncParams::init(cfg.hidden, cfg.dynamics_width, next());
  // Start with an identity flow (zero drift) so the latent state is not
  // scrambled between observations before the dynamics are learned.
  p.ode.w2 = Tensor::zeros({cfg.hidden, cfg.dynamics_width});
  p.modal_attn = ModalAttentionParams::init(3, cfg.modal_attn_width, cfg.hidden, cfg.v_in(), next());
  p.mgru = MGruParams::init(cfg.hidden, cfg.v_in(), cfg.u_width(), next());
  p.temporal_attn = TemporalAttentionParams::init(cfg.temporal_attn_width, cfg.v_total(), next());
  {
    std::mt19937_64 rng(next());
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(cfg.head_width()));
    p.head_w = Tensor::zeros({1, cfg.head_width()});
    for (double& e : p.head_w.data) e = dist(rng);
  }
  p.head_b = Tensor::zeros({1});
  p.h0 = Tensor::zeros({cfg.hidden});
  return p;
}

void ModelParams::visit(const std::function<void(const std::string&, ad::Tensor&)>& fn) {
  for (auto& [name, t] : param_refs(*this)) fn(name, *t);
}

void ModelParams::visit(const std::function<void(const std::string&, const ad::Tensor&)>& fn) const {
  for (auto& [name, t] : param_refs(const_cast<ModelParams&>(*this))) fn(name, *t);
}

ForwardResult forward(Binder& bind, const ObservationSequence& subject, const ModelParams& params) {
  const ModelConfig& cfg = params.config;
  const int T = static_cast<int>(subject.observations.size());
  if (T < 1) throw std::invalid_argument("forward: subject has no observations");

  // Normalize observation times into [0, 1] by the subject's span.
  std::vector<double> times(static_cast<size_t>(T));
  double span = subject.observations.back().time_days;
  for (int i = 0; i < T; ++i)
    times[static_cast<size_t>(i)] = span > 0.0 ? subject.observations[static_cast<size_t>(i)].time_days / span : 0.0;

  ForwardTrace trace;
  trace.times = times;

  std::vector<Var> step_vs;
  std::vector<std::vector<Var>> step_modal;
  for (const auto& obs : subject.observations) {
    std::vector<Var> modal;
    for (int m = 0; m < 3; ++m) {
      const auto& seg = obs.get(static_cast<Modality>(m));
      std::optional<Var> emb;
      if (seg) emb = tcn_embed(bind, *seg, params.tcn[static_cast<size_t>(m)]);
      modal.push_back(attach_mask(bind, emb, cfg.embed_dim));
    }
    step_vs.push_back(ad::concat(modal, 0));
    step_modal.push_back(std::move(modal));
  }

  auto step_update = [&](Var h_prime, Var v_in, int i) {
    Var u = v_in;
    if (cfg.modal_attention) {
      auto res = modal_attention(bind, h_prime, step_modal[static_cast<size_t>(i)], v_in,
                                 params.modal_attn);
      const Tensor& w = res.weights.value();
      trace.modal_weights.push_back({w.at(0), w.at(1), w.at(2)});
      u = ad::concat({v_in, res.pooled}, 0);
    }
    return mgru_update(bind, h_prime, v_in, u, params.mgru, cfg.gate);
  };

  // Constant intercept channel: the gate matrices have no bias vectors, so
  // every encoder variant gets one through its input.
  Var one = bind.constant(Tensor::vec({1.0}));
  Var h0v = bind(params.h0);
  std::vector<Var> states;
  if (cfg.encoder == EncoderKind::ode_rnn) {
    auto f = [&](Var h) { return ode_func(bind, h, params.ode); };
    states = ode_rnn_encode(h0v, times, f, cfg.solver, [&](Var h_prime, int i) {
      Var v_in = ad::concat({step_vs[static_cast<size_t>(i)], one}, 0);
      return step_update(h_prime, v_in, i);
    });
  } else {
    Var h = h0v;
    double prev = times[0];
    for (int i = 0; i < T; ++i) {
      double dt = times[static_cast<size_t>(i)] - prev;
      prev = times[static_cast<size_t>(i)];
      Var v_in = ad::concat(
          {step_vs[static_cast<size_t>(i)], one, bind.constant(Tensor::vec({dt}))}, 0);
      h = step_update(h, v_in, i);
      states.push_back(h);
    }
  }

  Var h_last = states.back();
  Var head_in = h_last;
  if (cfg.temporal_attention) {
    auto res = temporal_self_attention(bind, step_vs, params.temporal_attn);
    trace.temporal_weights.assign(res.weights.value().data.begin(), res.weights.value().data.end());
    head_in = ad::concat({res.pooled, h_last}, 0);
  }
  Var logit = ad::add(ad::matmul(bind(params.head_w), head_in), bind(params.head_b));
  return ForwardResult{ad::sigmoid(logit), std::move(trace)};
}

Prediction predict(const ObservationSequence& subject, const ModelParams& params) {
  ad::Tape tape;
  Binder bind(tape);
  auto res = forward(bind, subject, params);
  return Prediction{res.prob.value().at(0), std::move(res.trace)};
}

Var bce_loss(Var prob, int label) {
  constexpr double eps = 1e-7;
  Var p = ad::clamp(prob, eps, 1.0 - eps);
  Var term;
  if (label == 1) {
    term = ad::log(p);
  } else {
    Var one = prob.tape->leaf(Tensor::vec({1.0}));
    term = ad::log(ad::sub(one, p));
  }
  return ad::scale(ad::sum(term), -1.0);
}

void adam_step(ModelParams& params, const std::vector<ad::Tensor>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  auto refs = param_refs(params);
  if (grads.size() != refs.size())
    throw std::invalid_argument("adam_step: gradient count does not match parameter count");
  if (state.m.empty()) {
    for (auto& [name, t] : refs) {
      state.m.emplace_back(t->data.size(), 0.0);
      state.v.emplace_back(t->data.size(), 0.0);
    }
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < refs.size(); ++k) {
    ad::Tensor& t = *refs[k].second;
    const ad::Tensor& g = grads[k];
    if (g.data.size() != t.data.size())
      throw std::invalid_argument("adam_step: shape mismatch for " + refs[k].first);
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (size_t i = 0; i < t.data.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g.data[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g.data[i] * g.data[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      t.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// --- Metrics ---

namespace {

void check_two_classes(const std::vector<int>& labels) {
  bool pos = false, neg = false;
  for (int y : labels) (y == 1 ? pos : neg) = true;
  if (!pos || !neg) throw std::invalid_argument("metrics: both classes required");
}

}  // namespace

double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_two_classes(labels);
  double wins = 0.0;
  long pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == 1) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

double auc_trapezoid(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_two_classes(labels);
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double p_total = std::count(labels.begin(), labels.end(), 1);
  double n_total = static_cast<double>(labels.size()) - p_total;

  double auc = 0.0, tp = 0.0, fp = 0.0, prev_tpr = 0.0, prev_fpr = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) tp += 1.0;
      else fp += 1.0;
      ++j;
    }
    double tpr = tp / p_total, fpr = fp / n_total;
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
    i = j;
  }
  return auc;
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_two_classes(labels);
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double p_total = std::count(labels.begin(), labels.end(), 1);

  double ap = 0.0, tp = 0.0, fp = 0.0, prev_recall = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) tp += 1.0;
      else fp += 1.0;
      ++j;
    }
    double recall = tp / p_total;
    double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double f1_score(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  double tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    bool pred = scores[i] >= threshold;
    if (pred && labels[i] == 1) ++tp;
    else if (pred) ++fp;
    else if (labels[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  double precision = tp / (tp + fp);
  double recall = tp / (tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels) {
  return Metrics{auc_pairwise(scores, labels), average_precision(scores, labels),
                 f1_score(scores, labels)};
}

Metrics evaluate(const ModelParams& params, const std::vector<ObservationSequence>& dataset) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : dataset) {
    scores.push_back(predict(s, params).prob);
    labels.push_back(s.label);
  }
  return compute_metrics(scores, labels);
}

MetricsReport aggregate_folds(const std::vector<Metrics>& folds) {
  MetricsReport r;
  r.folds = folds;
  auto stat = [&](auto field) {
    double mean = 0.0;
    for (const auto& f : folds) mean += f.*field;
    mean /= folds.size();
    double var = 0.0;
    for (const auto& f : folds) var += (f.*field - mean) * (f.*field - mean);
    var /= folds.size();  // population std across folds
    return std::pair{mean, std::sqrt(var)};
  };
  std::tie(r.mean.auc, r.stddev.auc) = stat(&Metrics::auc);
  std::tie(r.mean.aupr, r.stddev.aupr) = stat(&Metrics::aupr);
  std::tie(r.mean.f1, r.stddev.f1) = stat(&Metrics::f1);
  return r;
}

// --- Training ---

TrainResult train(const std::vector<ObservationSequence>& dataset, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  {
    std::vector<int> labels;
    for (const auto& s : dataset) labels.push_back(s.label);
    check_two_classes(labels);
  }

  ModelParams params = ModelParams::init(model_cfg, train_cfg.seed);
  std::mt19937_64 rng(train_cfg.seed ^ 0x9e3779b97f4a7c15ull);

  // Optional stratified validation slice for early stopping.
  std::vector<size_t> train_idx, val_idx;
  bool early = train_cfg.early_stop_patience > 0 && train_cfg.val_fraction > 0.0 &&
               dataset.size() >= 10;
  if (early) {
    for (int cls : {0, 1}) {
      std::vector<size_t> idx;
      for (size_t i = 0; i < dataset.size(); ++i)
        if ((dataset[i].label == 1) == (cls == 1)) idx.push_back(i);
      std::shuffle(idx.begin(), idx.end(), rng);
      size_t n_val = static_cast<size_t>(std::floor(train_cfg.val_fraction * idx.size()));
      for (size_t i = 0; i < idx.size(); ++i)
        (i < n_val ? val_idx : train_idx).push_back(idx[i]);
    }
    bool ok = !val_idx.empty();
    bool pos = false, neg = false;
    for (size_t i : train_idx) (dataset[i].label == 1 ? pos : neg) = true;
    if (!ok || !pos || !neg) early = false;
  }
  if (!early) {
    train_idx.clear();
    val_idx.clear();
    for (size_t i = 0; i < dataset.size(); ++i) train_idx.push_back(i);
  }
  std::sort(train_idx.begin(), train_idx.end());

  auto refs = param_refs(params);
  AdamState opt;
  double lr = train_cfg.learning_rate;
  std::vector<double> history;

  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  auto subject_loss = [&](const ObservationSequence& s) {
    ad::Tape tape;
    Binder bind(tape);
    auto fr = forward(bind, s, params);
    return bce_loss(fr.prob, s.label).value().at(0);
  };

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double total = 0.0;
    for (size_t idx : train_idx) {
      ad::Tape tape;
      Binder bind(tape);
      auto fr = forward(bind, dataset[idx], params);
      Var loss = bce_loss(fr.prob, dataset[idx].label);
      total += loss.value().at(0);
      auto node_grads = ad::backward(tape, loss);
      std::vector<ad::Tensor> grads;
      grads.reserve(refs.size());
      for (auto& [name, t] : refs) {
        int id = bind.leaf_id(*t);
        grads.push_back(id >= 0 ? node_grads[static_cast<size_t>(id)] : ad::Tensor::zeros(t->shape));
      }
      if (train_cfg.grad_clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads)
          for (double v : g.data) sq += v * v;
        double norm = std::sqrt(sq);
        if (norm > train_cfg.grad_clip_norm) {
          double scale = train_cfg.grad_clip_norm / norm;
          for (auto& g : grads)
            for (double& v : g.data) v *= scale;
        }
      }
      adam_step(params, grads, opt, lr);
    }
    history.push_back(total / static_cast<double>(train_idx.size()));

    if (early) {
      double val = 0.0;
      for (size_t idx : val_idx) val += subject_loss(dataset[idx]);
      val /= static_cast<double>(val_idx.size());
      if (val < best_val - 1e-12) {
        best_val = val;
        best = params;
        bad_epochs = 0;
      } else if (++bad_epochs >= train_cfg.early_stop_patience) {
        break;
      }
    }
    lr *= train_cfg.lr_decay_per_epoch;
  }
  if (early && std::isfinite(best_val)) params = best;
  return TrainResult{std::move(params), std::move(history)};
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int k, uint64_t seed) {
  if (static_cast<int>(labels.size()) < k)
    throw std::invalid_argument("stratified_folds: fewer subjects than folds");
  std::vector<int> folds(labels.size(), -1);
  std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4full);
  for (int cls : {0, 1}) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < labels.size(); ++i)
      if ((labels[i] == 1) == (cls == 1)) idx.push_back(i);
    if (static_cast<int>(idx.size()) < k)
      throw std::invalid_argument("stratified_folds: class with fewer members than folds; "
                                  "stratification infeasible");
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t i = 0; i < idx.size(); ++i) folds[idx[i]] = static_cast<int>(i % static_cast<size_t>(k));
  }
  return folds;
}

MetricsReport cross_validate(const std::vector<ObservationSequence>& dataset, int k,
                             const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  std::vector<int> labels;
  for (const auto& s : dataset) labels.push_back(s.label);
  auto folds = stratified_folds(labels, k, train_cfg.seed);

  std::vector<Metrics> per_fold;
  for (int f = 0; f < k; ++f) {
    std::vector<ObservationSequence> train_set, test_set;
    for (size_t i = 0; i < dataset.size(); ++i)
      (folds[i] == f ? test_set : train_set).push_back(dataset[i]);
    TrainConfig tc = train_cfg;
    tc.seed = train_cfg.seed + 1000003ull * static_cast<uint64_t>(f);
    auto result = train(train_set, model_cfg, tc);
    per_fold.push_back(evaluate(result.params, test_set));
  }
  return aggregate_folds(per_fold);
}

// --- Ablation harness ---

const std::vector<std::string> kAblationVariants = {"full", "no-modal", "no-temporal", "ode-rnn",
                                                    "rnn-dt"};

ModelConfig apply_variant(ModelConfig cfg, const std::string& variant) {
  cfg.modal_attention = true;
  cfg.temporal_attention = true;
  cfg.encoder = EncoderKind::ode_rnn;
  if (variant == "full") return cfg;
  if (variant == "no-modal") {
    cfg.modal_attention = false;
    return cfg;
  }
  if (variant == "no-temporal") {
    cfg.temporal_attention = false;
    return cfg;
  }
  if (variant == "ode-rnn") {
    cfg.modal_attention = false;
    cfg.temporal_attention = false;
    return cfg;
  }
  if (variant == "rnn-dt") {
    cfg.modal_attention = false;
    cfg.temporal_attention = false;
    cfg.encoder = EncoderKind::rnn_delta_t;
    return cfg;
  }
  throw std::invalid_argument("unknown ablation variant: " + variant);
}

std::vector<AblationRow> run_ablation(const std::vector<ObservationSequence>& dataset,
                                      const ModelConfig& base_cfg, const TrainConfig& train_cfg,
                                      const std::vector<std::string>& variants,
                                      const std::vector<uint64_t>& seeds, int k) {
  std::vector<AblationRow> rows;
  for (uint64_t seed : seeds) {
    for (const auto& variant : variants) {
      TrainConfig tc = train_cfg;
      tc.seed = seed;  // shared folds and per-fold seeds across variants
      auto report = cross_validate(dataset, k, apply_variant(base_cfg, variant), tc);
      rows.push_back(AblationRow{variant, seed, std::move(report)});
    }
  }
  return rows;
}

// --- Config / checkpoint serialization ---

namespace {

std::string encoder_name(EncoderKind e) { return e == EncoderKind::ode_rnn ? "ode-rnn" : "rnn-dt"; }
std::string gate_name(GateKind g) { return g == GateKind::logistic ? "logistic" : "tanh"; }
std::string method_name(SolverMethod m) { return m == SolverMethod::rk4 ? "rk4" : "euler"; }

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
}

}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"embed_dim", cfg.embed_dim},
              {"tcn_channels", cfg.tcn_channels},
              {"tcn_layers", cfg.tcn_layers},
              {"tcn_kernel", cfg.tcn_kernel},
              {"hidden", cfg.hidden},
              {"dynamics_width", cfg.dynamics_width},
              {"modal_attn_width", cfg.modal_attn_width},
              {"temporal_attn_width", cfg.temporal_attn_width},
              {"modal_attention", cfg.modal_attention},
              {"temporal_attention", cfg.temporal_attention},
              {"encoder", encoder_name(cfg.encoder)},
              {"gate", gate_name(cfg.gate)},
              {"solver_method", method_name(cfg.solver.method)},
              {"solver_step_cap", cfg.solver.step_cap},
              {"solver_max_steps", cfg.solver.max_steps_per_interval}};
}

ModelConfig model_config_from_json(const json& j, bool strict) {
  static const std::set<std::string> known = {
      "embed_dim",      "tcn_channels",   "tcn_layers",        "tcn_kernel",
      "hidden",         "dynamics_width", "modal_attn_width",  "temporal_attn_width",
      "modal_attention", "temporal_attention", "encoder",      "gate",
      "solver_method",  "solver_step_cap", "solver_max_steps"};
  if (strict) reject_unknown(j, known, "model config");
  ModelConfig cfg;
  cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
  cfg.tcn_channels = j.value("tcn_channels", cfg.tcn_channels);
  cfg.tcn_layers = j.value("tcn_layers", cfg.tcn_layers);
  cfg.tcn_kernel = j.value("tcn_kernel", cfg.tcn_kernel);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.dynamics_width = j.value("dynamics_width", cfg.dynamics_width);
  cfg.modal_attn_width = j.value("modal_attn_width", cfg.modal_attn_width);
  cfg.temporal_attn_width = j.value("temporal_attn_width", cfg.temporal_attn_width);
  cfg.modal_attention = j.value("modal_attention", cfg.modal_attention);
  cfg.temporal_attention = j.value("temporal_attention", cfg.temporal_attention);
  std::string enc = j.value("encoder", encoder_name(cfg.encoder));
  if (enc == "ode-rnn") cfg.encoder = EncoderKind::ode_rnn;
  else if (enc == "rnn-dt") cfg.encoder = EncoderKind::rnn_delta_t;
  else throw std::invalid_argument("model config: unknown encoder '" + enc + "'");
  std::string gate = j.value("gate", gate_name(cfg.gate));
  if (gate == "logistic") cfg.gate = GateKind::logistic;
  else if (gate == "tanh") cfg.gate = GateKind::tanh_gate;
  else throw std::invalid_argument("model config: unknown gate '" + gate + "'");
  std::string method = j.value("solver_method", method_name(cfg.solver.method));
  if (method == "rk4") cfg.solver.method = SolverMethod::rk4;
  else if (method == "euler") cfg.solver.method = SolverMethod::euler;
  else throw std::invalid_argument("model config: unknown solver method '" + method + "'");
  cfg.solver.step_cap = j.value("solver_step_cap", cfg.solver.step_cap);
  cfg.solver.max_steps_per_interval = j.value("solver_max_steps", cfg.solver.max_steps_per_interval);
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate},
              {"lr_decay_per_epoch", cfg.lr_decay_per_epoch},
              {"epochs", cfg.epochs},
              {"seed", cfg.seed},
              {"early_stop_patience", cfg.early_stop_patience},
              {"val_fraction", cfg.val_fraction},
              {"grad_clip_norm", cfg.grad_clip_norm}};
}

TrainConfig train_config_from_json(const json& j, bool strict) {
  static const std::set<std::string> known = {"learning_rate", "lr_decay_per_epoch", "epochs",
                                              "seed", "early_stop_patience", "val_fraction",
                                              "grad_clip_norm"};
  if (strict) reject_unknown(j, known, "train config");
  TrainConfig cfg;
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.lr_decay_per_epoch = j.value("lr_decay_per_epoch", cfg.lr_decay_per_epoch);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.early_stop_patience = j.value("early_stop_patience", cfg.early_stop_patience);
  cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
  cfg.grad_clip_norm = j.value("grad_clip_norm", cfg.grad_clip_norm);
  if (cfg.learning_rate < 0.0) throw std::invalid_argument("train config: learning_rate must be >= 0");
  if (cfg.lr_decay_per_epoch <= 0.0 || cfg.lr_decay_per_epoch > 1.0)
    throw std::invalid_argument("train config: lr_decay_per_epoch must be in (0, 1]");
  return cfg;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  json tensors = json::object();
  params.visit([&](const std::string& name, const ad::Tensor& t) {
    tensors[name] = json{{"shape", t.shape}, {"data", t.data}};
  });
  json j{{"format_version", 1},
         {"config", model_config_to_json(params.config)},
         {"tensors", std::move(tensors)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump() << "\n";
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("checkpoint " + path + ": malformed JSON");
  if (j.value("format_version", 0) != 1)
    throw std::runtime_error("checkpoint " + path + ": unsupported format version");
  ModelConfig cfg = model_config_from_json(j.at("config"));
  ModelParams params = ModelParams::init(cfg, 0);
  const json& tensors = j.at("tensors");
  params.visit([&](const std::string& name, ad::Tensor& t) {
    const json& jt = tensors.at(name);
    auto shape = jt.at("shape").get<std::vector<int>>();
    if (shape != t.shape)
      throw std::runtime_error("checkpoint " + path + ": shape mismatch for " + name);
    t.data = jt.at("data").get<std::vector<double>>();
  });
  return params;
}

}  // namespace odemm
