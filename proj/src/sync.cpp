#include "odemm/sync.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace odemm {

using nlohmann::json;

std::string medication_point_name(MedicationPoint p) {
  switch (p) {
    case MedicationPoint::before_medication: return "before_medication";
    case MedicationPoint::after_medication: return "after_medication";
    case MedicationPoint::no_medication: return "no_medication";
    case MedicationPoint::another_time: return "another_time";
  }
  return "?";
}

std::optional<MedicationPoint> medication_point_from_name(const std::string& name) {
  if (name == "before_medication") return MedicationPoint::before_medication;
  if (name == "after_medication") return MedicationPoint::after_medication;
  if (name == "no_medication") return MedicationPoint::no_medication;
  if (name == "another_time") return MedicationPoint::another_time;
  return std::nullopt;
}

const std::optional<CleanSegment>& ObservationPoint::get(Modality m) const {
  switch (m) {
    case Modality::walking: return walking;
    case Modality::tapping: return tapping;
    default: return memory;
  }
}

std::optional<CleanSegment>& ObservationPoint::get(Modality m) {
  switch (m) {
    case Modality::walking: return walking;
    case Modality::tapping: return tapping;
    default: return memory;
  }
}

int ObservationPoint::present_count() const {
  return (walking ? 1 : 0) + (tapping ? 1 : 0) + (memory ? 1 : 0);
}

int ObservationSequence::total_tests() const {
  int n = 0;
  for (const auto& o : observations) n += o.present_count();
  return n;
}

std::map<UnifiedId, std::vector<RawTestRecord>> build_unified_ids(const std::vector<RawTestRecord>& records) {
  std::map<UnifiedId, std::vector<RawTestRecord>> out;
  for (const auto& r : records) {
    if (r.medication_point == MedicationPoint::another_time) continue;
    out[UnifiedId{r.participant_id, r.medication_point}].push_back(r);
  }
  return out;
}

ObservationSequence synchronize(const std::vector<RawTestRecord>& records, double window_hours) {
  if (records.empty()) throw std::invalid_argument("synchronize: empty record list");
  std::vector<const RawTestRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const RawTestRecord* a, const RawTestRecord* b) {
    if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
    return static_cast<int>(a->modality) < static_cast<int>(b->modality);
  });

  const double window_s = window_hours * 3600.0;
  std::vector<std::vector<const RawTestRecord*>> groups;
  for (const RawTestRecord* r : sorted) {
    if (groups.empty() || r->timestamp - groups.back().front()->timestamp > window_s)
      groups.emplace_back();
    groups.back().push_back(r);
  }

  ObservationSequence seq;
  seq.unified_id = UnifiedId{records.front().participant_id, records.front().medication_point};
  double first_time = 0.0;
  for (size_t k = 0; k < groups.size(); ++k) {
    // Latest record wins per modality within a window.
    std::map<Modality, const RawTestRecord*> kept;
    for (const RawTestRecord* r : groups[k]) {
      auto it = kept.find(r->modality);
      if (it == kept.end() || r->timestamp >= it->second->timestamp) kept[r->modality] = r;
    }
    double mean_ts = 0.0;
    for (const auto& [m, r] : kept) mean_ts += r->timestamp;
    mean_ts /= kept.size();
    if (k == 0) first_time = mean_ts;

    ObservationPoint obs;
    obs.time_days = (mean_ts - first_time) / 86400.0;
    for (const auto& [m, r] : kept) obs.get(m) = r->payload;
    seq.observations.push_back(std::move(obs));
  }
  return seq;
}

std::vector<ObservationSequence> filter_cohort(const std::vector<ObservationSequence>& sequences,
                                               double min_age, int min_tests) {
  std::vector<ObservationSequence> out;
  for (const auto& s : sequences)
    if (s.age >= min_age && s.total_tests() >= min_tests) out.push_back(s);
  return out;
}

// --- File formats ---

namespace {

json segment_to_json(const CleanSegment& seg) {
  json j = json::array();
  for (const auto& ch : seg.channels) j.push_back(ch);
  return j;
}

CleanSegment segment_from_json(const json& j, Modality m) {
  CleanSegment seg;
  seg.modality = m;
  for (const auto& ch : j) seg.channels.push_back(ch.get<std::vector<double>>());
  return seg;
}

[[noreturn]] void line_fail(const std::string& path, size_t line_no, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

template <typename Fn>
void read_ndjson(const std::string& path, Fn&& per_line) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) line_fail(path, line_no, "malformed JSON");
    try {
      per_line(j);
    } catch (const std::exception& e) {
      line_fail(path, line_no, e.what());
    }
  }
}

}  // namespace

void write_records(const std::string& path, const std::vector<RawTestRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& r : records) {
    json j{{"participant_id", r.participant_id},
           {"modality", modality_name(r.modality)},
           {"timestamp", r.timestamp},
           {"medication_point", medication_point_name(r.medication_point)},
           {"sample_rate", r.sample_rate},
           {"samples", segment_to_json(r.payload)}};
    out << j.dump() << "\n";
  }
}

std::vector<RawTestRecord> read_records(const std::string& path, double* sample_rate_out) {
  std::vector<RawTestRecord> records;
  read_ndjson(path, [&](const json& j) {
    RawTestRecord r;
    r.participant_id = j.at("participant_id").get<std::string>();
    auto m = modality_from_name(j.at("modality").get<std::string>());
    if (!m) throw std::runtime_error("unknown modality " + j.at("modality").dump());
    r.modality = *m;
    r.timestamp = j.at("timestamp").get<double>();
    if (r.timestamp <= 0.0) throw std::runtime_error("nonpositive timestamp");
    auto p = medication_point_from_name(j.at("medication_point").get<std::string>());
    if (!p) throw std::runtime_error("unknown medication_point " + j.at("medication_point").dump());
    r.medication_point = *p;
    r.sample_rate = j.at("sample_rate").get<double>();
    r.payload = segment_from_json(j.at("samples"), r.modality);
    records.push_back(std::move(r));
  });
  if (sample_rate_out && !records.empty()) *sample_rate_out = records.front().sample_rate;
  return records;
}

void write_metadata(const std::string& path, const std::vector<SubjectMeta>& subjects) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& s : subjects) {
    json j{{"participant_id", s.participant_id},
           {"age", s.age},
           {"gender", s.gender},
           {"professional_diagnosis", s.professional_diagnosis}};
    out << j.dump() << "\n";
  }
}

std::vector<SubjectMeta> read_metadata(const std::string& path) {
  std::vector<SubjectMeta> subjects;
  read_ndjson(path, [&](const json& j) {
    SubjectMeta s;
    s.participant_id = j.at("participant_id").get<std::string>();
    s.age = j.at("age").get<double>();
    s.gender = j.value("gender", "");
    s.professional_diagnosis = j.at("professional_diagnosis").get<bool>();
    subjects.push_back(std::move(s));
  });
  return subjects;
}

void write_observations(const std::string& path, const std::vector<ObservationSequence>& sequences) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& s : sequences) {
    json obs = json::array();
    for (const auto& o : s.observations) {
      json jo{{"time_days", o.time_days}};
      for (Modality m : {Modality::walking, Modality::tapping, Modality::memory}) {
        const auto& seg = o.get(m);
        jo[modality_name(m)] = seg ? segment_to_json(*seg) : json(nullptr);
      }
      obs.push_back(std::move(jo));
    }
    json j{{"participant_id", s.unified_id.participant_id},
           {"medication_point", medication_point_name(s.unified_id.medication_point)},
           {"label", s.label},
           {"age", s.age},
           {"observations", std::move(obs)}};
    out << j.dump() << "\n";
  }
}

std::vector<ObservationSequence> read_observations(const std::string& path) {
  std::vector<ObservationSequence> sequences;
  read_ndjson(path, [&](const json& j) {
    ObservationSequence s;
    s.unified_id.participant_id = j.at("participant_id").get<std::string>();
    auto p = medication_point_from_name(j.at("medication_point").get<std::string>());
    if (!p) throw std::runtime_error("unknown medication_point");
    s.unified_id.medication_point = *p;
    s.label = j.at("label").get<int>();
    s.age = j.at("age").get<double>();
    for (const auto& jo : j.at("observations")) {
      ObservationPoint o;
      o.time_days = jo.at("time_days").get<double>();
      for (Modality m : {Modality::walking, Modality::tapping, Modality::memory}) {
        const auto& seg = jo.at(modality_name(m));
        if (!seg.is_null()) o.get(m) = segment_from_json(seg, m);
      }
      s.observations.push_back(std::move(o));
    }
    sequences.push_back(std::move(s));
  });
  return sequences;
}

}  // namespace odemm
