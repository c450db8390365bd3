#include "odemm/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace odemm {

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::walking: return "walking";
    case Modality::tapping: return "tapping";
    case Modality::memory: return "memory";
  }
  return "?";
}

std::optional<Modality> modality_from_name(const std::string& name) {
  if (name == "walking") return Modality::walking;
  if (name == "tapping") return Modality::tapping;
  if (name == "memory") return Modality::memory;
  return std::nullopt;
}

AccelSequence remove_gravity(const AccelSequence& seq, double cutoff_hz) {
  if (seq.samples.size() < 2) throw std::invalid_argument("remove_gravity: need at least 2 samples");
  if (cutoff_hz <= 0.0 || cutoff_hz >= seq.sample_rate / 2.0)
    throw std::invalid_argument("remove_gravity: cutoff " + std::to_string(cutoff_hz) +
                                " Hz out of range (0, " + std::to_string(seq.sample_rate / 2.0) + ")");
  double dt = 1.0 / seq.sample_rate;
  double rc = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
  double alpha = dt / (rc + dt);

  AccelSequence out;
  out.sample_rate = seq.sample_rate;
  out.samples.resize(seq.samples.size());
  std::array<double, 3> gravity = seq.samples[0];
  for (size_t n = 0; n < seq.samples.size(); ++n) {
    for (int a = 0; a < 3; ++a) {
      gravity[a] += alpha * (seq.samples[n][a] - gravity[a]);
      out.samples[n][a] = seq.samples[n][a] - gravity[a];
    }
  }
  return out;
}

std::vector<int> detect_change_points(const std::vector<double>& signal, double penalty) {
  const int n = static_cast<int>(signal.size());
  if (n < 2) throw std::invalid_argument("detect_change_points: need at least 2 samples");
  if (penalty <= 0.0) throw std::invalid_argument("detect_change_points: penalty must be positive");

  std::vector<double> s(n + 1, 0.0), sq(n + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    s[i + 1] = s[i] + signal[i];
    sq[i + 1] = sq[i] + signal[i] * signal[i];
  }
  auto seg_cost = [&](int a, int b) {  // [a, b)
    double len = b - a;
    double mean = (s[b] - s[a]) / len;
    return (sq[b] - sq[a]) - len * mean * mean;
  };

  std::vector<double> best(n + 1, std::numeric_limits<double>::infinity());
  std::vector<int> prev(n + 1, 0);
  best[0] = -penalty;
  for (int t = 1; t <= n; ++t) {
    for (int s0 = 0; s0 < t; ++s0) {
      double c = best[s0] + seg_cost(s0, t) + penalty;
      if (c < best[t]) {
        best[t] = c;
        prev[t] = s0;
      }
    }
  }
  std::vector<int> splits;
  for (int t = n; t > 0; t = prev[t])
    if (prev[t] > 0) splits.push_back(prev[t]);
  std::reverse(splits.begin(), splits.end());
  return splits;
}

namespace {

double pooled_std(const std::vector<std::vector<double>>& channels, int a, int b) {
  double acc = 0.0;
  for (const auto& ch : channels) {
    double mean = 0.0;
    for (int i = a; i < b; ++i) mean += ch[static_cast<size_t>(i)];
    mean /= (b - a);
    double var = 0.0;
    for (int i = a; i < b; ++i) {
      double d = ch[static_cast<size_t>(i)] - mean;
      var += d * d;
    }
    acc += var / (b - a);
  }
  return std::sqrt(acc / channels.size());
}

}  // namespace

std::optional<CleanSegment> extract_active_segment(const std::vector<std::vector<double>>& channels,
                                                   const std::vector<int>& change_points,
                                                   double std_threshold, Modality modality,
                                                   int min_len) {
  if (channels.empty() || channels[0].empty()) return std::nullopt;
  const int n = static_cast<int>(channels[0].size());
  std::vector<int> bounds;
  bounds.push_back(0);
  for (int cp : change_points) {
    if (cp <= bounds.back() || cp >= n)
      throw std::invalid_argument("extract_active_segment: change point out of bounds");
    bounds.push_back(cp);
  }
  bounds.push_back(n);

  int best_a = -1, best_b = -1;
  for (size_t k = 0; k + 1 < bounds.size(); ++k) {
    int a = bounds[k], b = bounds[k + 1];
    if (b - a < min_len) continue;
    if (pooled_std(channels, a, b) <= std_threshold) continue;
    if (b - a > best_b - best_a) {  // tie keeps the earlier segment
      best_a = a;
      best_b = b;
    }
  }
  if (best_a < 0) return std::nullopt;

  CleanSegment seg;
  seg.modality = modality;
  for (const auto& ch : channels)
    seg.channels.emplace_back(ch.begin() + best_a, ch.begin() + best_b);
  return seg;
}

CleanSegment encode_memory_record(const std::vector<MemoryEventSequence>& games) {
  if (games.empty()) throw std::invalid_argument("encode_memory_record: empty games list");
  std::vector<const MemoryEventSequence*> ordered;
  for (const auto& g : games) ordered.push_back(&g);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    double ta = a->events.empty() ? 0.0 : a->events.front().time;
    double tb = b->events.empty() ? 0.0 : b->events.front().time;
    return ta < tb;
  });

  CleanSegment seg;
  seg.modality = Modality::memory;
  seg.channels.assign(4, {});
  double offset = 0.0;
  for (const auto* g : ordered) {
    double last = offset;
    for (const auto& e : g->events) {
      double t = e.time + offset;
      seg.channels[0].push_back(t);
      seg.channels[1].push_back(e.actual);
      seg.channels[2].push_back(e.target);
      seg.channels[3].push_back(e.score);
      last = t;
    }
    offset = last;
  }
  return seg;
}

CleanSegment truncate_tail(CleanSegment seg, int max_len) {
  int n = seg.length();
  if (n <= max_len) return seg;
  for (auto& ch : seg.channels) ch.erase(ch.begin(), ch.end() - max_len);
  return seg;
}

std::optional<CleanSegment> prepare_accel_record(const AccelSequence& seq, Modality modality,
                                                 const PrepConfig& cfg) {
  AccelSequence filtered = remove_gravity(seq, cfg.gravity_cutoff_hz);
  std::vector<double> norm(filtered.samples.size());
  for (size_t i = 0; i < filtered.samples.size(); ++i) {
    const auto& v = filtered.samples[i];
    norm[i] = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  }
  auto splits = detect_change_points(norm, cfg.changepoint_penalty);
  std::vector<std::vector<double>> channels(3, std::vector<double>(filtered.samples.size()));
  for (size_t i = 0; i < filtered.samples.size(); ++i)
    for (int a = 0; a < 3; ++a) channels[static_cast<size_t>(a)][i] = filtered.samples[i][a];
  auto seg = extract_active_segment(channels, splits, cfg.std_threshold, modality, cfg.min_segment_len);
  if (!seg) return std::nullopt;
  return truncate_tail(std::move(*seg), cfg.max_segment_len);
}

}  // namespace odemm
