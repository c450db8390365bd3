// Command-line front end: synthesize cohorts, preprocess raw records,
// train/evaluate the classifier, run the ablation grid, export attention
// weights. Every run writes its fully-resolved configuration next to its
// outputs so the run can be reproduced exactly.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "odemm/config_json.hpp"
#include "odemm/model.hpp"
#include "odemm/signal.hpp"
#include "odemm/sync.hpp"
#include "odemm/synth.hpp"
#include "odemm/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace odemm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

void write_json_file(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error(path + ": malformed JSON");
  return j;
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
}

// --- synth config <-> json ---

json synth_config_to_json(const SynthConfig& c) {
  return json{{"n_subjects", c.n_subjects},
              {"pd_fraction", c.pd_fraction},
              {"missing_rate", c.missing_rate},
              {"mean_seq_len", c.mean_seq_len},
              {"seq_len_sigma", c.seq_len_sigma},
              {"propensities", c.propensities},
              {"signal_strength", c.signal_strength},
              {"noise_level", c.noise_level},
              {"seed", c.seed},
              {"sample_rate", c.sample_rate},
              {"seg_len_min", c.seg_len_min},
              {"seg_len_max", c.seg_len_max},
              {"another_time_fraction", c.another_time_fraction}};
}

SynthConfig synth_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"n_subjects", "pd_fraction", "missing_rate", "mean_seq_len", "seq_len_sigma",
                       "propensities", "signal_strength", "noise_level", "seed", "sample_rate",
                       "seg_len_min", "seg_len_max", "another_time_fraction"},
                      "synth config");
  SynthConfig c;
  c.n_subjects = j.value("n_subjects", c.n_subjects);
  c.pd_fraction = j.value("pd_fraction", c.pd_fraction);
  c.missing_rate = j.value("missing_rate", c.missing_rate);
  c.mean_seq_len = j.value("mean_seq_len", c.mean_seq_len);
  c.seq_len_sigma = j.value("seq_len_sigma", c.seq_len_sigma);
  if (j.contains("propensities")) c.propensities = j.at("propensities").get<std::array<double, 3>>();
  c.signal_strength = j.value("signal_strength", c.signal_strength);
  c.noise_level = j.value("noise_level", c.noise_level);
  c.seed = j.value("seed", c.seed);
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.seg_len_min = j.value("seg_len_min", c.seg_len_min);
  c.seg_len_max = j.value("seg_len_max", c.seg_len_max);
  c.another_time_fraction = j.value("another_time_fraction", c.another_time_fraction);
  return c;
}

// --- preprocess config ---

struct PreprocessOptions {
  PrepConfig prep;
  double window_hours = 24.0;
  double min_age = 45.0;
  int min_tests = 5;
};

json preprocess_options_to_json(const PreprocessOptions& o) {
  return json{{"gravity_cutoff_hz", o.prep.gravity_cutoff_hz},
              {"changepoint_penalty", o.prep.changepoint_penalty},
              {"std_threshold", o.prep.std_threshold},
              {"min_segment_len", o.prep.min_segment_len},
              {"max_segment_len", o.prep.max_segment_len},
              {"window_hours", o.window_hours},
              {"min_age", o.min_age},
              {"min_tests", o.min_tests}};
}

PreprocessOptions preprocess_options_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"gravity_cutoff_hz", "changepoint_penalty", "std_threshold",
                       "min_segment_len", "max_segment_len", "window_hours", "min_age", "min_tests"},
                      "preprocess config");
  PreprocessOptions o;
  o.prep.gravity_cutoff_hz = j.value("gravity_cutoff_hz", o.prep.gravity_cutoff_hz);
  o.prep.changepoint_penalty = j.value("changepoint_penalty", o.prep.changepoint_penalty);
  o.prep.std_threshold = j.value("std_threshold", o.prep.std_threshold);
  o.prep.min_segment_len = j.value("min_segment_len", o.prep.min_segment_len);
  o.prep.max_segment_len = j.value("max_segment_len", o.prep.max_segment_len);
  o.window_hours = j.value("window_hours", o.window_hours);
  o.min_age = j.value("min_age", o.min_age);
  o.min_tests = j.value("min_tests", o.min_tests);
  return o;
}

json metrics_to_json(const Metrics& m) {
  return json{{"auc", m.auc}, {"aupr", m.aupr}, {"f1", m.f1}};
}

std::vector<ObservationSequence> load_observations(const std::string& path) {
  auto data = read_observations(path);
  if (data.empty()) throw std::runtime_error(path + ": no observation sequences");
  return data;
}

// --- subcommand payloads ---

struct SynthArgs {
  std::string out_dir;
  std::string config_path;
  SynthConfig cfg;
};

int run_synth(const SynthArgs& a) {
  a.cfg.validate();
  fs::create_directories(a.out_dir);
  auto cohort = generate_cohort(a.cfg);
  fs::path out(a.out_dir);
  write_records((out / "records.ndjson").string(), cohort.records);
  write_metadata((out / "metadata.ndjson").string(), cohort.metadata);
  write_json_file(out / "synth.config.json", synth_config_to_json(a.cfg));
  auto stats = summarize_cohort(cohort.records, cohort.metadata);
  std::cout << "wrote " << cohort.records.size() << " records for " << cohort.metadata.size()
            << " participants to " << a.out_dir << "\n"
            << stats.table();
  return kExitOk;
}

struct PreprocessArgs {
  std::string records_path, metadata_path, out_dir;
  PreprocessOptions opts;
};

int run_preprocess(const PreprocessArgs& a) {
  auto raw = read_records(a.records_path);
  auto meta = read_metadata(a.metadata_path);
  std::map<std::string, SubjectMeta> by_id;
  for (const auto& m : meta) by_id[m.participant_id] = m;

  int dropped_another_time = 0, dropped_unusable_signal = 0;
  std::vector<RawTestRecord> cleaned;
  for (auto& r : raw) {
    if (r.medication_point == MedicationPoint::another_time) {
      ++dropped_another_time;
      continue;
    }
    if (r.modality == Modality::memory) {
      r.payload = truncate_tail(std::move(r.payload), a.opts.prep.max_segment_len);
      cleaned.push_back(std::move(r));
      continue;
    }
    if (r.payload.channel_count() != 3)
      throw std::runtime_error(a.records_path + ": accelerometer record for " + r.participant_id +
                               " does not have 3 channels");
    AccelSequence seq;
    seq.sample_rate = r.sample_rate;
    for (int i = 0; i < r.payload.length(); ++i)
      seq.samples.push_back({r.payload.channels[0][static_cast<size_t>(i)],
                             r.payload.channels[1][static_cast<size_t>(i)],
                             r.payload.channels[2][static_cast<size_t>(i)]});
    auto segment = prepare_accel_record(seq, r.modality, a.opts.prep);
    if (!segment) {
      ++dropped_unusable_signal;
      continue;
    }
    r.payload = std::move(*segment);
    cleaned.push_back(std::move(r));
  }

  int dropped_missing_metadata = 0, dropped_age = 0, dropped_min_tests = 0;
  std::vector<ObservationSequence> kept;
  for (auto& [id, recs] : build_unified_ids(cleaned)) {
    auto seq = synchronize(recs, a.opts.window_hours);
    auto it = by_id.find(id.participant_id);
    if (it == by_id.end()) {
      std::cerr << "warning: no metadata for participant " << id.participant_id << ", dropped\n";
      ++dropped_missing_metadata;
      continue;
    }
    seq.age = it->second.age;
    seq.label = it->second.professional_diagnosis ? 1 : 0;
    if (seq.age < a.opts.min_age) {
      ++dropped_age;
      continue;
    }
    if (seq.total_tests() < a.opts.min_tests) {
      ++dropped_min_tests;
      continue;
    }
    kept.push_back(std::move(seq));
  }

  fs::create_directories(a.out_dir);
  fs::path out(a.out_dir);
  write_observations((out / "observations.ndjson").string(), kept);
  write_json_file(out / "preprocess.config.json", preprocess_options_to_json(a.opts));
  json report{{"input_records", raw.size()},
              {"kept_subjects", kept.size()},
              {"dropped", json{{"another_time", dropped_another_time},
                               {"unusable_signal", dropped_unusable_signal},
                               {"missing_metadata", dropped_missing_metadata},
                               {"age", dropped_age},
                               {"min_tests", dropped_min_tests}}}};
  write_json_file(out / "preprocess.report.json", report);
  std::cout << "kept " << kept.size() << " subjects\n"
            << "dropped: another_time=" << dropped_another_time
            << " unusable_signal=" << dropped_unusable_signal
            << " missing_metadata=" << dropped_missing_metadata << " age=" << dropped_age
            << " min_tests=" << dropped_min_tests << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data_path, out_dir;
  ModelConfig model;
  TrainConfig train;
};

int run_train(const TrainArgs& a) {
  auto data = load_observations(a.data_path);
  auto result = train(data, a.model, a.train);
  fs::create_directories(a.out_dir);
  fs::path out(a.out_dir);
  save_checkpoint((out / "checkpoint.json").string(), result.params);
  write_json_file(out / "loss_history.json", json(result.loss_history));
  write_json_file(out / "train.config.json", json{{"model", model_config_to_json(a.model)},
                                                  {"train", train_config_to_json(a.train)},
                                                  {"data", a.data_path}});
  std::cout << "trained on " << data.size() << " subjects, " << result.loss_history.size()
            << " epochs, final mean loss "
            << (result.loss_history.empty() ? 0.0 : result.loss_history.back()) << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint_path, data_path, out_dir;
};

int run_eval(const EvalArgs& a) {
  auto params = load_checkpoint(a.checkpoint_path);
  auto data = load_observations(a.data_path);
  Metrics m = evaluate(params, data);
  fs::create_directories(a.out_dir);
  fs::path out(a.out_dir);
  write_json_file(out / "metrics.json", metrics_to_json(m));
  write_json_file(out / "eval.config.json",
                  json{{"checkpoint", a.checkpoint_path}, {"data", a.data_path}});
  std::cout << "auc=" << m.auc << " aupr=" << m.aupr << " f1=" << m.f1 << "\n";
  return kExitOk;
}

struct AblateArgs {
  std::string data_path, out_dir;
  std::vector<std::string> variants = kAblationVariants;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  int folds = 5;
  ModelConfig model;
  TrainConfig train;
};

int run_ablate(const AblateArgs& a) {
  auto data = load_observations(a.data_path);
  auto rows = run_ablation(data, a.model, a.train, a.variants, a.seeds, a.folds);

  json out_rows = json::array();
  for (const auto& row : rows) {
    json folds = json::array();
    for (const auto& f : row.report.folds) folds.push_back(metrics_to_json(f));
    out_rows.push_back(json{{"variant", row.variant},
                            {"seed", row.seed},
                            {"mean", metrics_to_json(row.report.mean)},
                            {"std", metrics_to_json(row.report.stddev)},
                            {"folds", std::move(folds)}});
  }
  fs::create_directories(a.out_dir);
  fs::path out(a.out_dir);
  write_json_file(out / "ablation.json", out_rows);
  write_json_file(out / "ablate.config.json",
                  json{{"model", model_config_to_json(a.model)},
                       {"train", train_config_to_json(a.train)},
                       {"variants", a.variants},
                       {"seeds", a.seeds},
                       {"folds", a.folds},
                       {"data", a.data_path}});

  // Mean-over-seeds summary per variant, in variant order.
  std::cout << "variant        mean_auc  mean_aupr  mean_f1\n";
  for (const auto& variant : a.variants) {
    double auc = 0, aupr = 0, f1 = 0;
    int n = 0;
    for (const auto& row : rows)
      if (row.variant == variant) {
        auc += row.report.mean.auc;
        aupr += row.report.mean.aupr;
        f1 += row.report.mean.f1;
        ++n;
      }
    if (n == 0) continue;
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(4);
    line << variant;
    for (size_t i = variant.size(); i < 15; ++i) line << ' ';
    line << auc / n << "    " << aupr / n << "     " << f1 / n;
    std::cout << line.str() << "\n";
  }
  return kExitOk;
}

struct ExportArgs {
  std::string checkpoint_path, data_path, out_dir, subject;
};

int run_export_attention(const ExportArgs& a) {
  auto params = load_checkpoint(a.checkpoint_path);
  auto data = load_observations(a.data_path);
  if (!a.subject.empty()) {
    std::vector<ObservationSequence> filtered;
    for (auto& s : data)
      if (s.unified_id.participant_id == a.subject || s.unified_id.str() == a.subject)
        filtered.push_back(std::move(s));
    if (filtered.empty()) throw std::runtime_error("subject not found: " + a.subject);
    data = std::move(filtered);
  }

  std::ostringstream modal, temporal;
  modal << "subject\tstep\ttime_norm\tmodality\tweight\n";
  temporal << "subject\tstep\ttime_norm\tweight\n";
  modal.precision(17);
  temporal.precision(17);
  for (const auto& s : data) {
    auto pred = predict(s, params);
    const std::string id = s.unified_id.str();
    for (size_t t = 0; t < pred.trace.modal_weights.size(); ++t)
      for (int m = 0; m < 3; ++m)
        modal << id << '\t' << t << '\t' << pred.trace.times[t] << '\t'
              << modality_name(static_cast<Modality>(m)) << '\t'
              << pred.trace.modal_weights[t][static_cast<size_t>(m)] << '\n';
    for (size_t t = 0; t < pred.trace.temporal_weights.size(); ++t)
      temporal << id << '\t' << t << '\t' << pred.trace.times[t] << '\t'
               << pred.trace.temporal_weights[t] << '\n';
  }

  fs::create_directories(a.out_dir);
  fs::path out(a.out_dir);
  write_text(out / "attention_modal.tsv", modal.str());
  write_text(out / "attention_temporal.tsv", temporal.str());
  write_json_file(out / "export-attention.config.json",
                  json{{"checkpoint", a.checkpoint_path},
                       {"data", a.data_path},
                       {"subject", a.subject}});
  std::cout << "exported attention tables for " << data.size() << " subjects\n";
  return kExitOk;
}

// Applies `--config` file content first, then CLI flags override it.
template <typename Fn>
void with_config_file(const std::string& path, Fn&& apply) {
  if (!path.empty()) apply(load_json_file(path));
}

void add_model_train_flags(CLI::App* cmd, ModelConfig& mc, TrainConfig& tc, std::string& encoder,
                           std::string& gate, bool& no_modal, bool& no_temporal) {
  cmd->add_option("--embed-dim", mc.embed_dim, "per-modality embedding size D");
  cmd->add_option("--tcn-channels", mc.tcn_channels, "conv channels per layer");
  cmd->add_option("--tcn-layers", mc.tcn_layers, "conv layers");
  cmd->add_option("--tcn-kernel", mc.tcn_kernel, "conv kernel size");
  cmd->add_option("--hidden", mc.hidden, "latent state size H");
  cmd->add_option("--dynamics-width", mc.dynamics_width, "ODE MLP width");
  cmd->add_option("--modal-attn-width", mc.modal_attn_width, "modal attention width");
  cmd->add_option("--temporal-attn-width", mc.temporal_attn_width, "temporal attention width");
  cmd->add_flag("--no-modal-attention", no_modal, "disable modal attention");
  cmd->add_flag("--no-temporal-attention", no_temporal, "disable temporal attention pooling");
  cmd->add_option("--encoder", encoder, "ode-rnn | rnn-dt")
      ->check(CLI::IsMember({"ode-rnn", "rnn-dt"}));
  cmd->add_option("--gate", gate, "logistic | tanh")->check(CLI::IsMember({"logistic", "tanh"}));
  cmd->add_option("--solver-step-cap", mc.solver.step_cap, "max solver step in normalized time");
  cmd->add_option("--solver-max-steps", mc.solver.max_steps_per_interval,
                  "max solver steps per interval");
  cmd->add_option("--epochs", tc.epochs, "training epochs");
  cmd->add_option("--lr", tc.learning_rate, "initial learning rate");
  cmd->add_option("--lr-decay", tc.lr_decay_per_epoch, "per-epoch learning-rate decay");
  cmd->add_option("--seed", tc.seed, "root random seed");
  cmd->add_option("--patience", tc.early_stop_patience, "early-stop patience (0 disables)");
  cmd->add_option("--val-fraction", tc.val_fraction, "validation slice for early stopping");
  cmd->add_option("--grad-clip", tc.grad_clip_norm, "global gradient-norm clip (0 disables)");
}

void finalize_model_flags(ModelConfig& mc, const std::string& encoder, const std::string& gate,
                          bool no_modal, bool no_temporal) {
  if (no_modal) mc.modal_attention = false;
  if (no_temporal) mc.temporal_attention = false;
  if (encoder == "rnn-dt") mc.encoder = EncoderKind::rnn_delta_t;
  if (encoder == "ode-rnn") mc.encoder = EncoderKind::ode_rnn;
  if (gate == "tanh") mc.gate = GateKind::tanh_gate;
  if (gate == "logistic") mc.gate = GateKind::logistic;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"irregular multimodal sensor-stream classifier pipeline"};
  app.require_subcommand(1);

  // synth
  SynthArgs synth_args;
  std::string synth_config_path;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic cohort");
  synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();
  synth_cmd->add_option("--config", synth_config_path, "JSON config file");
  auto* s_subjects = synth_cmd->add_option("--subjects", synth_args.cfg.n_subjects, "cohort size");
  auto* s_seed = synth_cmd->add_option("--seed", synth_args.cfg.seed, "root seed");
  auto* s_pd = synth_cmd->add_option("--pd-fraction", synth_args.cfg.pd_fraction, "positive-class fraction");
  auto* s_miss = synth_cmd->add_option("--missing-rate", synth_args.cfg.missing_rate, "target modality missing rate");
  auto* s_strength = synth_cmd->add_option("--signal-strength", synth_args.cfg.signal_strength,
                                           "planted class-signal strength in [0,1]");
  auto* s_noise = synth_cmd->add_option("--noise-level", synth_args.cfg.noise_level, "corruption level");
  auto* s_len = synth_cmd->add_option("--mean-seq-len", synth_args.cfg.mean_seq_len, "mean observations per subject");
  auto* s_smin = synth_cmd->add_option("--seg-len-min", synth_args.cfg.seg_len_min, "min segment samples");
  auto* s_smax = synth_cmd->add_option("--seg-len-max", synth_args.cfg.seg_len_max, "max segment samples");

  // preprocess
  PreprocessArgs prep_args;
  std::string prep_config_path;
  auto* prep_cmd = app.add_subcommand("preprocess", "clean, synchronize and filter raw records");
  prep_cmd->add_option("--records", prep_args.records_path, "raw records file")->required();
  prep_cmd->add_option("--metadata", prep_args.metadata_path, "subject metadata file")->required();
  prep_cmd->add_option("--out", prep_args.out_dir, "output directory")->required();
  prep_cmd->add_option("--config", prep_config_path, "JSON config file");
  auto* p_cut = prep_cmd->add_option("--gravity-cutoff", prep_args.opts.prep.gravity_cutoff_hz, "low-pass cutoff Hz");
  auto* p_pen = prep_cmd->add_option("--penalty", prep_args.opts.prep.changepoint_penalty, "change-point penalty");
  auto* p_std = prep_cmd->add_option("--std-threshold", prep_args.opts.prep.std_threshold, "active-segment std threshold");
  auto* p_minl = prep_cmd->add_option("--min-segment-len", prep_args.opts.prep.min_segment_len, "min active-segment samples");
  auto* p_maxl = prep_cmd->add_option("--max-segment-len", prep_args.opts.prep.max_segment_len, "tail-truncation cap");
  auto* p_win = prep_cmd->add_option("--window-hours", prep_args.opts.window_hours, "synchronization window");
  auto* p_age = prep_cmd->add_option("--min-age", prep_args.opts.min_age, "cohort minimum age");
  auto* p_tests = prep_cmd->add_option("--min-tests", prep_args.opts.min_tests, "cohort minimum total tests");

  // train
  TrainArgs train_args;
  std::string train_config_path, train_encoder, train_gate;
  bool train_no_modal = false, train_no_temporal = false;
  auto* train_cmd = app.add_subcommand("train", "train the classifier");
  train_cmd->add_option("--data", train_args.data_path, "observations file")->required();
  train_cmd->add_option("--out", train_args.out_dir, "output directory")->required();
  train_cmd->add_option("--config", train_config_path, "JSON config file with model/train sections");
  add_model_train_flags(train_cmd, train_args.model, train_args.train, train_encoder, train_gate,
                        train_no_modal, train_no_temporal);

  // eval
  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint_path, "model checkpoint")->required();
  eval_cmd->add_option("--data", eval_args.data_path, "observations file")->required();
  eval_cmd->add_option("--out", eval_args.out_dir, "output directory")->required();

  // ablate
  AblateArgs ablate_args;
  std::string ablate_config_path, ablate_variants, ablate_seeds, ablate_encoder, ablate_gate;
  bool ablate_no_modal = false, ablate_no_temporal = false;
  auto* ablate_cmd = app.add_subcommand("ablate", "cross-validated variant comparison");
  ablate_cmd->add_option("--data", ablate_args.data_path, "observations file")->required();
  ablate_cmd->add_option("--out", ablate_args.out_dir, "output directory")->required();
  ablate_cmd->add_option("--config", ablate_config_path, "JSON config file with model/train sections");
  ablate_cmd->add_option("--variants", ablate_variants, "comma-separated variant list");
  ablate_cmd->add_option("--seeds", ablate_seeds, "comma-separated seed list");
  ablate_cmd->add_option("--folds", ablate_args.folds, "cross-validation folds");
  add_model_train_flags(ablate_cmd, ablate_args.model, ablate_args.train, ablate_encoder,
                        ablate_gate, ablate_no_modal, ablate_no_temporal);

  // export-attention
  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-attention", "dump attention weight tables");
  export_cmd->add_option("--checkpoint", export_args.checkpoint_path, "model checkpoint")->required();
  export_cmd->add_option("--data", export_args.data_path, "observations file")->required();
  export_cmd->add_option("--out", export_args.out_dir, "output directory")->required();
  export_cmd->add_option("--subject", export_args.subject, "restrict to one subject id");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) {
      with_config_file(synth_config_path, [&](const json& j) {
        SynthConfig from_file = synth_config_from_json(j);
        // CLI flags win over the file.
        if (!*s_subjects) synth_args.cfg.n_subjects = from_file.n_subjects;
        if (!*s_seed) synth_args.cfg.seed = from_file.seed;
        if (!*s_pd) synth_args.cfg.pd_fraction = from_file.pd_fraction;
        if (!*s_miss) synth_args.cfg.missing_rate = from_file.missing_rate;
        if (!*s_strength) synth_args.cfg.signal_strength = from_file.signal_strength;
        if (!*s_noise) synth_args.cfg.noise_level = from_file.noise_level;
        if (!*s_len) synth_args.cfg.mean_seq_len = from_file.mean_seq_len;
        if (!*s_smin) synth_args.cfg.seg_len_min = from_file.seg_len_min;
        if (!*s_smax) synth_args.cfg.seg_len_max = from_file.seg_len_max;
        synth_args.cfg.seq_len_sigma = from_file.seq_len_sigma;
        synth_args.cfg.propensities = from_file.propensities;
        synth_args.cfg.sample_rate = from_file.sample_rate;
        synth_args.cfg.another_time_fraction = from_file.another_time_fraction;
      });
      return run_synth(synth_args);
    }
    if (prep_cmd->parsed()) {
      with_config_file(prep_config_path, [&](const json& j) {
        PreprocessOptions from_file = preprocess_options_from_json(j);
        if (!*p_cut) prep_args.opts.prep.gravity_cutoff_hz = from_file.prep.gravity_cutoff_hz;
        if (!*p_pen) prep_args.opts.prep.changepoint_penalty = from_file.prep.changepoint_penalty;
        if (!*p_std) prep_args.opts.prep.std_threshold = from_file.prep.std_threshold;
        if (!*p_minl) prep_args.opts.prep.min_segment_len = from_file.prep.min_segment_len;
        if (!*p_maxl) prep_args.opts.prep.max_segment_len = from_file.prep.max_segment_len;
        if (!*p_win) prep_args.opts.window_hours = from_file.window_hours;
        if (!*p_age) prep_args.opts.min_age = from_file.min_age;
        if (!*p_tests) prep_args.opts.min_tests = from_file.min_tests;
      });
      return run_preprocess(prep_args);
    }
    if (train_cmd->parsed()) {
      with_config_file(train_config_path, [&](const json& j) {
        reject_unknown_keys(j, {"model", "train"}, "train config");
        ModelConfig mc = j.contains("model") ? model_config_from_json(j.at("model")) : ModelConfig{};
        TrainConfig tc = j.contains("train") ? train_config_from_json(j.at("train")) : TrainConfig{};
        // Flags already hold CLI values; merge only fields the user didn't set.
        ModelConfig defaults;
        TrainConfig tdefaults;
        auto pick = [](auto cli_value, auto default_value, auto file_value) {
          return cli_value != default_value ? cli_value : file_value;
        };
        mc.embed_dim = pick(train_args.model.embed_dim, defaults.embed_dim, mc.embed_dim);
        mc.tcn_channels = pick(train_args.model.tcn_channels, defaults.tcn_channels, mc.tcn_channels);
        mc.tcn_layers = pick(train_args.model.tcn_layers, defaults.tcn_layers, mc.tcn_layers);
        mc.tcn_kernel = pick(train_args.model.tcn_kernel, defaults.tcn_kernel, mc.tcn_kernel);
        mc.hidden = pick(train_args.model.hidden, defaults.hidden, mc.hidden);
        mc.dynamics_width = pick(train_args.model.dynamics_width, defaults.dynamics_width, mc.dynamics_width);
        mc.modal_attn_width = pick(train_args.model.modal_attn_width, defaults.modal_attn_width, mc.modal_attn_width);
        mc.temporal_attn_width =
            pick(train_args.model.temporal_attn_width, defaults.temporal_attn_width, mc.temporal_attn_width);
        mc.solver.step_cap = pick(train_args.model.solver.step_cap, defaults.solver.step_cap, mc.solver.step_cap);
        mc.solver.max_steps_per_interval = pick(train_args.model.solver.max_steps_per_interval,
                                                defaults.solver.max_steps_per_interval,
                                                mc.solver.max_steps_per_interval);
        tc.epochs = pick(train_args.train.epochs, tdefaults.epochs, tc.epochs);
        tc.learning_rate = pick(train_args.train.learning_rate, tdefaults.learning_rate, tc.learning_rate);
        tc.lr_decay_per_epoch =
            pick(train_args.train.lr_decay_per_epoch, tdefaults.lr_decay_per_epoch, tc.lr_decay_per_epoch);
        tc.seed = pick(train_args.train.seed, tdefaults.seed, tc.seed);
        tc.early_stop_patience =
            pick(train_args.train.early_stop_patience, tdefaults.early_stop_patience, tc.early_stop_patience);
        tc.val_fraction = pick(train_args.train.val_fraction, tdefaults.val_fraction, tc.val_fraction);
        tc.grad_clip_norm = pick(train_args.train.grad_clip_norm, tdefaults.grad_clip_norm, tc.grad_clip_norm);
        train_args.model = mc;
        train_args.train = tc;
      });
      finalize_model_flags(train_args.model, train_encoder, train_gate, train_no_modal,
                           train_no_temporal);
      return run_train(train_args);
    }
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (ablate_cmd->parsed()) {
      with_config_file(ablate_config_path, [&](const json& j) {
        reject_unknown_keys(j, {"model", "train"}, "ablate config");
        if (j.contains("model")) ablate_args.model = model_config_from_json(j.at("model"));
        if (j.contains("train")) ablate_args.train = train_config_from_json(j.at("train"));
      });
      finalize_model_flags(ablate_args.model, ablate_encoder, ablate_gate, ablate_no_modal,
                           ablate_no_temporal);
      if (!ablate_variants.empty()) {
        ablate_args.variants.clear();
        std::stringstream ss(ablate_variants);
        std::string item;
        while (std::getline(ss, item, ',')) ablate_args.variants.push_back(item);
      }
      if (!ablate_seeds.empty()) {
        ablate_args.seeds.clear();
        std::stringstream ss(ablate_seeds);
        std::string item;
        while (std::getline(ss, item, ',')) ablate_args.seeds.push_back(std::stoull(item));
      }
      return run_ablate(ablate_args);
    }
    if (export_cmd->parsed()) return run_export_attention(export_args);
  } catch (const ad::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
