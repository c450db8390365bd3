#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "odemm/attention.hpp"
#include "odemm/encoders.hpp"
#include "odemm/ode.hpp"
#include "odemm/sync.hpp"
#include "odemm/tensor.hpp"

namespace odemm {

enum class EncoderKind { ode_rnn, rnn_delta_t };

struct ModelConfig {
  int embed_dim = 16;  // D
  int tcn_channels = 16;
  int tcn_layers = 3;
  int tcn_kernel = 3;
  int hidden = 32;          // H
  int dynamics_width = 64;  // H_f
  int modal_attn_width = 16;
  int temporal_attn_width = 16;
  bool modal_attention = true;
  bool temporal_attention = true;
  EncoderKind encoder = EncoderKind::ode_rnn;
  GateKind gate = GateKind::logistic;
  SolverConfig solver;

  // 3 modalities, each a masked embedding of width 2D
  int v_total() const { return 3 * 2 * embed_dim; }
  // gate input width: embeddings plus a constant intercept channel (the gates
  // have no bias vectors); the RNN+dt encoder appends the interval as well
  int v_in() const { return v_total() + 1 + (encoder == EncoderKind::rnn_delta_t ? 1 : 0); }
  int u_width() const { return modal_attention ? v_in() + 2 * embed_dim : v_in(); }
  int head_width() const { return temporal_attention ? v_total() + hidden : hidden; }
};

struct TrainConfig {
  double learning_rate = 0.01;
  double lr_decay_per_epoch = 0.96;
  int epochs = 100;
  uint64_t seed = 0;
  int early_stop_patience = 10;  // 0 disables early stopping
  double val_fraction = 0.1;
  double grad_clip_norm = 5.0;  // global-norm clip per update; 0 disables
};

struct ModelParams {
  ModelConfig config;
  std::array<TcnParams, 3> tcn;  // walking, tapping, memory
  OdeFuncParams ode;
  ModalAttentionParams modal_attn;
  MGruParams mgru;
  TemporalAttentionParams temporal_attn;
  ad::Tensor head_w;  // (1 x head_width)
  ad::Tensor head_b;  // (1)
  ad::Tensor h0;      // (H), learned initial state

  static ModelParams init(const ModelConfig& config, uint64_t seed);

  // Enumerates every learnable tensor with a stable name, in a fixed order.
  void visit(const std::function<void(const std::string&, ad::Tensor&)>& fn);
  void visit(const std::function<void(const std::string&, const ad::Tensor&)>& fn) const;
};

struct ForwardTrace {
  std::vector<double> times;                         // normalized per subject
  std::vector<std::array<double, 3>> modal_weights;  // per step, when modal attention is on
  std::vector<double> temporal_weights;              // when temporal attention is on
};

struct ForwardResult {
  ad::Var prob;  // length-1 vector
  ForwardTrace trace;
};

ForwardResult forward(ad::Binder& bind, const ObservationSequence& subject, const ModelParams& params);

struct Prediction {
  double prob = 0.0;
  ForwardTrace trace;
};

Prediction predict(const ObservationSequence& subject, const ModelParams& params);

// -[y log p + (1-y) log(1-p)] with p clamped to [1e-7, 1 - 1e-7].
ad::Var bce_loss(ad::Var prob, int label);

// --- Optimizer ---

struct AdamState {
  std::vector<std::vector<double>> m, v;  // aligned with ModelParams::visit order
  long step = 0;
};

void adam_step(ModelParams& params, const std::vector<ad::Tensor>& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// --- Metrics ---

struct Metrics {
  double auc = 0.0;
  double aupr = 0.0;
  double f1 = 0.0;
};

double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels);
double auc_trapezoid(const std::vector<double>& scores, const std::vector<int>& labels);
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);
double f1_score(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold = 0.5);

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels);
Metrics evaluate(const ModelParams& params, const std::vector<ObservationSequence>& dataset);

struct MetricsReport {
  std::vector<Metrics> folds;
  Metrics mean;
  Metrics stddev;  // population std across folds
};

MetricsReport aggregate_folds(const std::vector<Metrics>& folds);

// --- Training ---

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_history;  // mean train loss per epoch
};

TrainResult train(const std::vector<ObservationSequence>& dataset, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg);

// Stratified fold assignment, one fold index per subject.
std::vector<int> stratified_folds(const std::vector<int>& labels, int k, uint64_t seed);

MetricsReport cross_validate(const std::vector<ObservationSequence>& dataset, int k,
                             const ModelConfig& model_cfg, const TrainConfig& train_cfg);

// --- Ablation harness ---

extern const std::vector<std::string> kAblationVariants;  // full, no-modal, no-temporal, ode-rnn, rnn-dt

ModelConfig apply_variant(ModelConfig cfg, const std::string& variant);

struct AblationRow {
  std::string variant;
  uint64_t seed = 0;
  MetricsReport report;
};

std::vector<AblationRow> run_ablation(const std::vector<ObservationSequence>& dataset,
                                      const ModelConfig& base_cfg, const TrainConfig& train_cfg,
                                      const std::vector<std::string>& variants,
                                      const std::vector<uint64_t>& seeds, int k = 5);

// --- Checkpoints ---

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace odemm
