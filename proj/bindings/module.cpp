#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "odemm/model.hpp"
#include "odemm/signal.hpp"
#include "odemm/synth.hpp"
#include "odemm/sync.hpp"

namespace py = pybind11;
using namespace odemm;

namespace {

Modality modality_arg(const std::string& name) {
  auto m = modality_from_name(name);
  if (!m) throw py::value_error("unknown modality: " + name);
  return *m;
}

MedicationPoint medication_arg(const std::string& name) {
  auto p = medication_point_from_name(name);
  if (!p) throw py::value_error("unknown medication point: " + name);
  return *p;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["auc"] = m.auc;
  d["aupr"] = m.aupr;
  d["f1"] = m.f1;
  return d;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["mean"] = metrics_dict(r.mean);
  d["std"] = metrics_dict(r.stddev);
  py::list folds;
  for (const auto& f : r.folds) folds.append(metrics_dict(f));
  d["folds"] = folds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Multimodal irregular-time-series PD classifier: core operations";

  py::class_<CleanSegment>(mod, "CleanSegment")
      .def(py::init([](const std::string& modality, std::vector<std::vector<double>> channels) {
             CleanSegment seg;
             seg.modality = modality_arg(modality);
             seg.channels = std::move(channels);
             return seg;
           }),
           py::arg("modality"), py::arg("channels"))
      .def_property_readonly("modality",
                             [](const CleanSegment& s) { return modality_name(s.modality); })
      .def_readonly("channels", &CleanSegment::channels)
      .def("length", &CleanSegment::length)
      .def("channel_count", &CleanSegment::channel_count);

  py::class_<RawTestRecord>(mod, "RawTestRecord")
      .def(py::init<>())
      .def_readwrite("participant_id", &RawTestRecord::participant_id)
      .def_property(
          "modality", [](const RawTestRecord& r) { return modality_name(r.modality); },
          [](RawTestRecord& r, const std::string& name) { r.modality = modality_arg(name); })
      .def_readwrite("timestamp", &RawTestRecord::timestamp)
      .def_property(
          "medication_point",
          [](const RawTestRecord& r) { return medication_point_name(r.medication_point); },
          [](RawTestRecord& r, const std::string& name) { r.medication_point = medication_arg(name); })
      .def_readwrite("sample_rate", &RawTestRecord::sample_rate)
      .def_readwrite("payload", &RawTestRecord::payload);

  py::class_<SubjectMeta>(mod, "SubjectMeta")
      .def(py::init<>())
      .def_readwrite("participant_id", &SubjectMeta::participant_id)
      .def_readwrite("age", &SubjectMeta::age)
      .def_readwrite("gender", &SubjectMeta::gender)
      .def_readwrite("professional_diagnosis", &SubjectMeta::professional_diagnosis);

  py::class_<ObservationPoint>(mod, "ObservationPoint")
      .def_readonly("time_days", &ObservationPoint::time_days)
      .def("present_count", &ObservationPoint::present_count)
      .def("get",
           [](const ObservationPoint& p, const std::string& modality) -> std::optional<CleanSegment> {
             return p.get(modality_arg(modality));
           },
           py::arg("modality"));

  py::class_<ObservationSequence>(mod, "ObservationSequence")
      .def_property_readonly("unified_id",
                             [](const ObservationSequence& s) { return s.unified_id.str(); })
      .def_readwrite("label", &ObservationSequence::label)
      .def_readwrite("age", &ObservationSequence::age)
      .def_readonly("observations", &ObservationSequence::observations)
      .def("total_tests", &ObservationSequence::total_tests);

  py::class_<SynthConfig>(mod, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_subjects", &SynthConfig::n_subjects)
      .def_readwrite("pd_fraction", &SynthConfig::pd_fraction)
      .def_readwrite("missing_rate", &SynthConfig::missing_rate)
      .def_readwrite("mean_seq_len", &SynthConfig::mean_seq_len)
      .def_readwrite("seq_len_sigma", &SynthConfig::seq_len_sigma)
      .def_readwrite("signal_strength", &SynthConfig::signal_strength)
      .def_readwrite("noise_level", &SynthConfig::noise_level)
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("seg_len_min", &SynthConfig::seg_len_min)
      .def_readwrite("seg_len_max", &SynthConfig::seg_len_max)
      .def("validate", &SynthConfig::validate);

  mod.def("generate_cohort", [](const SynthConfig& cfg) {
    SynthCohort c = generate_cohort(cfg);
    return py::make_tuple(c.records, c.metadata);
  });
  mod.def("calibrated_presence_rates", &calibrated_presence_rates);
  mod.def("summarize_cohort", [](const std::vector<RawTestRecord>& records,
                                 const std::vector<SubjectMeta>& metadata) {
    return summarize_cohort(records, metadata).table();
  });

  mod.def("synchronize", &synchronize, py::arg("records"), py::arg("window_hours") = 24.0);
  mod.def("build_unified_ids", [](const std::vector<RawTestRecord>& records) {
    py::dict out;
    for (auto& [uid, recs] : build_unified_ids(records)) out[py::str(uid.str())] = recs;
    return out;
  });
  mod.def("filter_cohort", &filter_cohort, py::arg("sequences"), py::arg("min_age") = 45.0,
          py::arg("min_tests") = 5);
  mod.def("read_records", [](const std::string& path) { return read_records(path); });
  mod.def("write_records", &write_records);
  mod.def("read_metadata", &read_metadata);
  mod.def("write_metadata", &write_metadata);
  mod.def("read_observations", &read_observations);
  mod.def("write_observations", &write_observations);

  mod.def("prepare_accel_record",
          [](double sample_rate, const std::vector<std::array<double, 3>>& samples,
             const std::string& modality) -> std::optional<CleanSegment> {
            AccelSequence seq{sample_rate, samples};
            return prepare_accel_record(seq, modality_arg(modality), PrepConfig{});
          },
          py::arg("sample_rate"), py::arg("samples"), py::arg("modality"));
  mod.def("detect_change_points", &detect_change_points, py::arg("signal"), py::arg("penalty"));

  py::class_<ModelConfig>(mod, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("embed_dim", &ModelConfig::embed_dim)
      .def_readwrite("tcn_channels", &ModelConfig::tcn_channels)
      .def_readwrite("tcn_layers", &ModelConfig::tcn_layers)
      .def_readwrite("tcn_kernel", &ModelConfig::tcn_kernel)
      .def_readwrite("hidden", &ModelConfig::hidden)
      .def_readwrite("dynamics_width", &ModelConfig::dynamics_width)
      .def_readwrite("modal_attn_width", &ModelConfig::modal_attn_width)
      .def_readwrite("temporal_attn_width", &ModelConfig::temporal_attn_width)
      .def_readwrite("modal_attention", &ModelConfig::modal_attention)
      .def_readwrite("temporal_attention", &ModelConfig::temporal_attention)
      .def_property(
          "encoder",
          [](const ModelConfig& c) {
            return c.encoder == EncoderKind::ode_rnn ? "ode-rnn" : "rnn-dt";
          },
          [](ModelConfig& c, const std::string& name) {
            if (name == "ode-rnn")
              c.encoder = EncoderKind::ode_rnn;
            else if (name == "rnn-dt")
              c.encoder = EncoderKind::rnn_delta_t;
            else
              throw py::value_error("unknown encoder: " + name);
          });

  py::class_<TrainConfig>(mod, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("lr_decay_per_epoch", &TrainConfig::lr_decay_per_epoch)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("early_stop_patience", &TrainConfig::early_stop_patience)
      .def_readwrite("val_fraction", &TrainConfig::val_fraction);

  py::class_<ModelParams>(mod, "ModelParams")
      .def_static("init", &ModelParams::init, py::arg("config"), py::arg("seed"))
      .def_readonly("config", &ModelParams::config)
      .def("parameter_names", [](ModelParams& p) {
        std::vector<std::string> names;
        p.visit([&](const std::string& name, ad::Tensor&) { names.push_back(name); });
        return names;
      });

  mod.def("predict", [](const ObservationSequence& subject, const ModelParams& params) {
    Prediction pr = predict(subject, params);
    py::dict d;
    d["prob"] = pr.prob;
    d["times"] = pr.trace.times;
    d["modal_weights"] = pr.trace.modal_weights;
    d["temporal_weights"] = pr.trace.temporal_weights;
    return d;
  });

  mod.def("train", [](const std::vector<ObservationSequence>& dataset, const ModelConfig& mc,
                      const TrainConfig& tc) {
    TrainResult r = train(dataset, mc, tc);
    return py::make_tuple(std::move(r.params), r.loss_history);
  });
  mod.def("evaluate", [](const ModelParams& params,
                         const std::vector<ObservationSequence>& dataset) {
    return metrics_dict(evaluate(params, dataset));
  });
  mod.def("cross_validate",
          [](const std::vector<ObservationSequence>& dataset, int k, const ModelConfig& mc,
             const TrainConfig& tc) { return report_dict(cross_validate(dataset, k, mc, tc)); });
  mod.def("run_ablation",
          [](const std::vector<ObservationSequence>& dataset, const ModelConfig& mc,
             const TrainConfig& tc, const std::vector<std::string>& variants,
             const std::vector<uint64_t>& seeds, int k) {
            py::list rows;
            for (const auto& row : run_ablation(dataset, mc, tc, variants, seeds, k)) {
              py::dict d;
              d["variant"] = row.variant;
              d["seed"] = row.seed;
              d["report"] = report_dict(row.report);
              rows.append(d);
            }
            return rows;
          },
          py::arg("dataset"), py::arg("config"), py::arg("train_config"), py::arg("variants"),
          py::arg("seeds"), py::arg("k") = 5);
  mod.def("ablation_variants", [] { return kAblationVariants; });

  mod.def("auc_pairwise", &auc_pairwise);
  mod.def("auc_trapezoid", &auc_trapezoid);
  mod.def("average_precision", &average_precision);
  mod.def("f1_score", &f1_score, py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);

  mod.def("save_checkpoint", &save_checkpoint);
  mod.def("load_checkpoint", &load_checkpoint);
}
