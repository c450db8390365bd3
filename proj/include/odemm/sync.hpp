#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "odemm/signal.hpp"

namespace odemm {

enum class MedicationPoint { before_medication, after_medication, no_medication, another_time };

std::string medication_point_name(MedicationPoint p);
std::optional<MedicationPoint> medication_point_from_name(const std::string& name);

// One self-reported activity test after signal cleaning.
struct RawTestRecord {
  std::string participant_id;
  Modality modality = Modality::walking;
  double timestamp = 0.0;  // seconds since epoch
  MedicationPoint medication_point = MedicationPoint::no_medication;
  double sample_rate = 100.0;
  CleanSegment payload;
};

struct UnifiedId {
  std::string participant_id;
  MedicationPoint medication_point = MedicationPoint::no_medication;

  std::string str() const { return participant_id + "+" + medication_point_name(medication_point); }
  auto operator<=>(const UnifiedId&) const = default;
};

// One synchronized multimodal snapshot.
struct ObservationPoint {
  double time_days = 0.0;  // days since the subject's first observation
  std::optional<CleanSegment> walking;
  std::optional<CleanSegment> tapping;
  std::optional<CleanSegment> memory;

  const std::optional<CleanSegment>& get(Modality m) const;
  std::optional<CleanSegment>& get(Modality m);
  int present_count() const;
};

struct ObservationSequence {
  UnifiedId unified_id;
  int label = 0;  // 1 = PD
  double age = 0.0;
  std::vector<ObservationPoint> observations;

  int total_tests() const;
};

struct SubjectMeta {
  std::string participant_id;
  double age = 0.0;
  std::string gender;
  bool professional_diagnosis = false;
};

// Partition by (participant, medication point); another_time records are dropped.
std::map<UnifiedId, std::vector<RawTestRecord>> build_unified_ids(const std::vector<RawTestRecord>& records);

// Greedy 24-hour-window grouping with latest-record dedup per modality.
// Group time is the mean timestamp of kept records, in days since the first group.
ObservationSequence synchronize(const std::vector<RawTestRecord>& records, double window_hours = 24.0);

// Keeps subjects with age >= min_age and total kept tests >= min_tests.
std::vector<ObservationSequence> filter_cohort(const std::vector<ObservationSequence>& sequences,
                                               double min_age = 45.0, int min_tests = 5);

// --- Dataset files (newline-delimited JSON) ---

void write_records(const std::string& path, const std::vector<RawTestRecord>& records);
// Throws std::runtime_error naming the offending line on malformed input.
std::vector<RawTestRecord> read_records(const std::string& path, double* sample_rate_out = nullptr);

void write_metadata(const std::string& path, const std::vector<SubjectMeta>& subjects);
std::vector<SubjectMeta> read_metadata(const std::string& path);

void write_observations(const std::string& path, const std::vector<ObservationSequence>& sequences);
std::vector<ObservationSequence> read_observations(const std::string& path);

}  // namespace odemm
