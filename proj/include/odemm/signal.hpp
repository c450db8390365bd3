#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace odemm {

enum class Modality { walking, tapping, memory };

std::string modality_name(Modality m);
std::optional<Modality> modality_from_name(const std::string& name);

// Raw accelerometer stream, (x, y, z) in G units.
struct AccelSequence {
  double sample_rate = 0.0;
  std::vector<std::array<double, 3>> samples;
};

// One memory-game touch: seconds from game start, tapped cell, expected cell, score.
struct MemoryEvent {
  double time = 0.0;
  int actual = 0;
  int target = 0;
  double score = 0.0;
};

struct MemoryEventSequence {
  std::vector<MemoryEvent> events;
};

// Cleaned fixed-role sequence, channels x time.
struct CleanSegment {
  Modality modality = Modality::walking;
  std::vector<std::vector<double>> channels;

  int length() const { return channels.empty() ? 0 : static_cast<int>(channels[0].size()); }
  int channel_count() const { return static_cast<int>(channels.size()); }
};

struct PrepConfig {
  double gravity_cutoff_hz = 0.3;
  double changepoint_penalty = 1.0;
  double std_threshold = 0.05;
  int min_segment_len = 50;
  int max_segment_len = 2000;
};

// Subtracts a first-order exponential low-pass estimate of gravity per axis.
// The filter state starts at the first sample.
AccelSequence remove_gravity(const AccelSequence& seq, double cutoff_hz);

// Exact DP minimizing per-segment squared deviation from the segment mean
// plus `penalty` per split. Returns sorted interior split indices; empty
// means the whole signal is one segment.
std::vector<int> detect_change_points(const std::vector<double>& signal, double penalty);

// Longest segment (tie: earliest) whose pooled per-channel standard deviation
// exceeds std_threshold and whose length reaches min_len. Pooled std is the
// root-mean of per-channel population variances.
std::optional<CleanSegment> extract_active_segment(const std::vector<std::vector<double>>& channels,
                                                   const std::vector<int>& change_points,
                                                   double std_threshold, Modality modality,
                                                   int min_len = 1);

// Concatenates games in chronological order into one 4-channel sequence
// (time, actual, target, score); later games' times are offset so the
// global time channel is nondecreasing.
CleanSegment encode_memory_record(const std::vector<MemoryEventSequence>& games);

// Full per-record pipeline: gravity removal, change-point segmentation on the
// Euclidean norm, active-segment selection, tail truncation. Returns nothing
// when no segment qualifies.
std::optional<CleanSegment> prepare_accel_record(const AccelSequence& seq, Modality modality,
                                                 const PrepConfig& cfg);

// Tail-truncates a segment to cfg.max_segment_len, keeping the most recent samples.
CleanSegment truncate_tail(CleanSegment seg, int max_len);

}  // namespace odemm
