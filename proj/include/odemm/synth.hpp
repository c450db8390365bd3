#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "odemm/sync.hpp"

namespace odemm {

struct SynthConfig {
  int n_subjects = 200;
  double pd_fraction = 0.624;
  double missing_rate = 0.576;
  double mean_seq_len = 13.75;
  double seq_len_sigma = 0.6;  // log-normal dispersion of observation counts
  // relative per-modality presence propensities: walking, tapping, memory
  std::array<double, 3> propensities = {6.49, 13.26, 1.73};
  double signal_strength = 1.0;  // 0 => classes identically distributed
  double noise_level = 0.5;
  uint64_t seed = 0;
  double sample_rate = 100.0;
  int seg_len_min = 200;
  int seg_len_max = 1000;
  double another_time_fraction = 0.05;  // extra records sync must drop

  void validate() const;  // throws std::invalid_argument naming the field
};

struct SynthCohort {
  std::vector<RawTestRecord> records;
  std::vector<SubjectMeta> metadata;
};

// Deterministic given seed; per-subject streams use derived seeds.
SynthCohort generate_cohort(const SynthConfig& config);

// Per-modality Bernoulli presence rates calibrated so the expected fraction of
// absent modality slots matches missing_rate, accounting for the
// at-least-one-modality-per-observation rule.
std::array<double, 3> calibrated_presence_rates(const SynthConfig& config);

struct CohortStats {
  int samples = 0;  // unified IDs
  double pd_fraction = 0.0;
  double missing_rate = 0.0;
  double mean_seq_len = 0.0, std_seq_len = 0.0;
  std::array<double, 3> tests_per_id_mean = {0, 0, 0};
  std::array<double, 3> tests_per_id_std = {0, 0, 0};

  std::string table() const;
};

CohortStats summarize_cohort(const std::vector<RawTestRecord>& records,
                             const std::vector<SubjectMeta>& metadata);

}  // namespace odemm
