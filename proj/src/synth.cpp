#include "odemm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace odemm {

namespace {

double splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return static_cast<double>(z ^ (z >> 31));
}

uint64_t derive_seed(uint64_t root, uint64_t stream) {
  uint64_t x = root ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  (void)splitmix64(x);
  return x;
}

}  // namespace

void SynthConfig::validate() const {
  auto bad = [](const std::string& field) {
    throw std::invalid_argument("synth config: invalid value for '" + field + "'");
  };
  if (n_subjects < 2) bad("n_subjects");
  if (pd_fraction <= 0.0 || pd_fraction >= 1.0) bad("pd_fraction");
  if (missing_rate < 0.0 || missing_rate > 1.0) bad("missing_rate");
  if (mean_seq_len < 2.0) bad("mean_seq_len");
  if (seq_len_sigma < 0.0) bad("seq_len_sigma");
  for (double p : propensities)
    if (p <= 0.0) bad("propensities");
  if (signal_strength < 0.0 || signal_strength > 1.0) bad("signal_strength");
  if (noise_level < 0.0 || noise_level > 1.0) bad("noise_level");
  if (sample_rate <= 0.0) bad("sample_rate");
  if (seg_len_min < 8 || seg_len_max < seg_len_min) bad("seg_len_min/seg_len_max");
  if (another_time_fraction < 0.0 || another_time_fraction > 0.5) bad("another_time_fraction");
}

std::array<double, 3> calibrated_presence_rates(const SynthConfig& cfg) {
  const double target_present = 1.0 - cfg.missing_rate;
  auto rates_for = [&](double c) {
    std::array<double, 3> p;
    for (int m = 0; m < 3; ++m)
      p[static_cast<size_t>(m)] = std::clamp(c * cfg.propensities[static_cast<size_t>(m)], 0.02, 0.98);
    return p;
  };
  // Expected present fraction per slot, including the force-one-if-none rule.
  auto present_fraction = [&](double c) {
    auto p = rates_for(c);
    double none = (1.0 - p[0]) * (1.0 - p[1]) * (1.0 - p[2]);
    return (p[0] + p[1] + p[2] + none) / 3.0;
  };
  double lo = 0.0, hi = 3.0 / *std::min_element(cfg.propensities.begin(), cfg.propensities.end());
  for (int it = 0; it < 200; ++it) {
    double mid = (lo + hi) / 2.0;
    (present_fraction(mid) < target_present ? lo : hi) = mid;
  }
  return rates_for((lo + hi) / 2.0);
}

namespace {

struct SubjectDraw {
  SubjectMeta meta;
  int label = 0;
  MedicationPoint med_point = MedicationPoint::no_medication;
};

// Accelerometer test: idle / active / idle, gravity on z. PD walking carries a
// tremor-band (4-6 Hz) component; PD tapping has inflated inter-tap jitter.
std::vector<std::vector<double>> make_accel(Modality modality, bool pd, const SynthConfig& cfg,
                                            bool corrupted, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len_dist(cfg.seg_len_min, cfg.seg_len_max);
  const int n = len_dist(rng);
  const double fs = cfg.sample_rate;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<std::vector<double>> ch(3, std::vector<double>(static_cast<size_t>(n), 0.0));
  const double idle_noise = 0.01;
  const double active_noise = 0.03 + 0.07 * cfg.noise_level;
  const int a0 = n / 4, a1 = n - n / 4;  // active middle half

  for (int i = 0; i < n; ++i) {
    double noise = (i >= a0 && i < a1) ? active_noise : idle_noise;
    ch[0][static_cast<size_t>(i)] = noise * gauss(rng);
    ch[1][static_cast<size_t>(i)] = noise * gauss(rng);
    ch[2][static_cast<size_t>(i)] = 1.0 + noise * gauss(rng);  // gravity
  }

  if (corrupted) {
    // quality failure: unstructured large-amplitude noise, class-independent
    for (auto& c : ch)
      for (double& v : c) v += 0.5 * gauss(rng);
    return ch;
  }

  if (modality == Modality::walking) {
    double gait_freq = 1.5 + unif(rng);
    double gait_phase = 2.0 * std::numbers::pi * unif(rng);
    for (int i = a0; i < a1; ++i) {
      double t = i / fs;
      double g = 0.25 * std::sin(2.0 * std::numbers::pi * gait_freq * t + gait_phase);
      ch[0][static_cast<size_t>(i)] += g;
      ch[2][static_cast<size_t>(i)] += 0.5 * g;
    }
    if (pd && cfg.signal_strength > 0.0) {
      double tremor_freq = 4.0 + 2.0 * unif(rng);
      double tremor_phase = 2.0 * std::numbers::pi * unif(rng);
      double amp = 0.3 * cfg.signal_strength;
      for (int i = a0; i < a1; ++i) {
        double t = i / fs;
        double s = amp * std::sin(2.0 * std::numbers::pi * tremor_freq * t + tremor_phase);
        ch[0][static_cast<size_t>(i)] += s;
        ch[1][static_cast<size_t>(i)] += 0.6 * s;
      }
    }
  } else {  // tapping: spike train on z, PD inter-tap jitter scales with strength
    double base_gap = 0.25;
    double jitter = pd ? 0.02 * (1.0 + 9.0 * cfg.signal_strength) : 0.02;
    double t = a0 / fs;
    std::normal_distribution<double> jit(0.0, jitter);
    while (t < a1 / fs) {
      int i = static_cast<int>(t * fs);
      for (int w = 0; w < 4 && i + w < a1; ++w) {
        double spike = 0.6 * std::exp(-0.5 * w);
        ch[2][static_cast<size_t>(i + w)] += spike;
        ch[0][static_cast<size_t>(i + w)] += 0.3 * spike;
      }
      t += std::max(0.05, base_gap + jit(rng));
    }
  }
  return ch;
}

// Memory game: 4 channels (time, actual, target, score); PD uplift on the
// per-touch error probability.
std::vector<std::vector<double>> make_memory(bool pd, const SynthConfig& cfg, bool corrupted,
                                             std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_dist(8, 20);
  std::uniform_int_distribution<int> cell(0, 8);
  std::uniform_real_distribution<double> gap(0.4, 1.4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = n_dist(rng);
  double err_p = corrupted ? 0.5 : 0.05 + (pd ? 0.45 * cfg.signal_strength : 0.0);

  std::vector<std::vector<double>> ch(4, std::vector<double>(static_cast<size_t>(n), 0.0));
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    t += gap(rng);
    int target = cell(rng);
    bool err = unif(rng) < err_p;
    int actual = target;
    if (err) actual = (target + 1 + cell(rng)) % 9;
    ch[0][static_cast<size_t>(i)] = t;
    ch[1][static_cast<size_t>(i)] = actual;
    ch[2][static_cast<size_t>(i)] = target;
    ch[3][static_cast<size_t>(i)] = err ? 0.0 : 1.0;
  }
  return ch;
}

}  // namespace

SynthCohort generate_cohort(const SynthConfig& cfg) {
  cfg.validate();
  const auto presence = calibrated_presence_rates(cfg);
  SynthCohort cohort;

  for (int s = 0; s < cfg.n_subjects; ++s) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<uint64_t>(s)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    SubjectMeta meta;
    {
      std::ostringstream id;
      id << "S" << s;
      meta.participant_id = id.str();
    }
    meta.age = std::clamp(60.61 + 8.76 * gauss(rng), 46.0, 90.0);
    meta.gender = unif(rng) < 0.677 ? "male" : "female";
    int label = unif(rng) < cfg.pd_fraction ? 1 : 0;
    meta.professional_diagnosis = label == 1;
    MedicationPoint med = label == 1
                              ? (unif(rng) < 0.5 ? MedicationPoint::before_medication
                                                 : MedicationPoint::after_medication)
                              : MedicationPoint::no_medication;

    std::lognormal_distribution<double> len_dist(
        std::log(cfg.mean_seq_len) - cfg.seq_len_sigma * cfg.seq_len_sigma / 2.0, cfg.seq_len_sigma);
    int n_obs = std::clamp(static_cast<int>(std::lround(len_dist(rng))), 2, 60);

    // Presence masks, with at least one modality per observation and at least
    // 5 tests per subject so the cohort filter keeps everyone by construction.
    std::vector<std::array<bool, 3>> present(static_cast<size_t>(n_obs));
    std::discrete_distribution<int> force_pick(cfg.propensities.begin(), cfg.propensities.end());
    int total = 0;
    for (auto& p : present) {
      for (int m = 0; m < 3; ++m) p[static_cast<size_t>(m)] = unif(rng) < presence[static_cast<size_t>(m)];
      if (!p[0] && !p[1] && !p[2]) p[static_cast<size_t>(force_pick(rng))] = true;
      total += (p[0] ? 1 : 0) + (p[1] ? 1 : 0) + (p[2] ? 1 : 0);
    }
    for (int i = 0; total < 5; ++i) {
      auto& p = present[static_cast<size_t>(i % n_obs)];
      int m = force_pick(rng);
      if (!p[static_cast<size_t>(m)]) {
        p[static_cast<size_t>(m)] = true;
        ++total;
      }
    }

    // Observation sessions more than 24h apart so grouping preserves them.
    std::lognormal_distribution<double> gap_dist(-0.7, 0.9);
    double t_days = 0.0;
    double base_ts = 1.6e9 + 1.0e7 * unif(rng);
    std::uniform_real_distribution<double> session_jitter(0.0, 3600.0);
    double corrupt_p = 0.3 * cfg.noise_level;

    for (int i = 0; i < n_obs; ++i) {
      if (i > 0) t_days += 1.05 + gap_dist(rng);
      double session_ts = base_ts + t_days * 86400.0;
      for (int m = 0; m < 3; ++m) {
        if (!present[static_cast<size_t>(i)][static_cast<size_t>(m)]) continue;
        bool corrupted = unif(rng) < corrupt_p;
        RawTestRecord rec;
        rec.participant_id = meta.participant_id;
        rec.modality = static_cast<Modality>(m);
        rec.timestamp = session_ts + session_jitter(rng);
        rec.medication_point = med;
        rec.sample_rate = cfg.sample_rate;
        rec.payload.modality = rec.modality;
        rec.payload.channels = (rec.modality == Modality::memory)
                                   ? make_memory(label == 1, cfg, corrupted, rng)
                                   : make_accel(rec.modality, label == 1, cfg, corrupted, rng);
        cohort.records.push_back(std::move(rec));
      }
      // occasional ambiguous-medication record, dropped downstream
      if (unif(rng) < cfg.another_time_fraction) {
        RawTestRecord rec;
        rec.participant_id = meta.participant_id;
        rec.modality = Modality::tapping;
        rec.timestamp = session_ts + 7200.0;
        rec.medication_point = MedicationPoint::another_time;
        rec.sample_rate = cfg.sample_rate;
        rec.payload.modality = rec.modality;
        rec.payload.channels = make_accel(Modality::tapping, label == 1, cfg, false, rng);
        cohort.records.push_back(std::move(rec));
      }
    }
    cohort.metadata.push_back(std::move(meta));
  }
  return cohort;
}

CohortStats summarize_cohort(const std::vector<RawTestRecord>& records,
                             const std::vector<SubjectMeta>& metadata) {
  std::map<std::string, const SubjectMeta*> meta_by_id;
  for (const auto& m : metadata) meta_by_id[m.participant_id] = &m;

  auto grouped = build_unified_ids(records);
  CohortStats st;
  st.samples = static_cast<int>(grouped.size());

  std::vector<double> seq_lens;
  std::array<std::vector<double>, 3> per_modality_counts;
  int present_slots = 0, total_slots = 0, pd = 0;

  for (const auto& [uid, recs] : grouped) {
    auto seq = synchronize(recs);
    seq_lens.push_back(static_cast<double>(seq.observations.size()));
    std::array<double, 3> counts = {0, 0, 0};
    for (const auto& obs : seq.observations) {
      for (int m = 0; m < 3; ++m) {
        ++total_slots;
        if (obs.get(static_cast<Modality>(m))) {
          ++present_slots;
          counts[static_cast<size_t>(m)] += 1.0;
        }
      }
    }
    for (int m = 0; m < 3; ++m) per_modality_counts[static_cast<size_t>(m)].push_back(counts[static_cast<size_t>(m)]);
    auto it = meta_by_id.find(uid.participant_id);
    if (it != meta_by_id.end() && it->second->professional_diagnosis) ++pd;
  }

  auto mean_std = [](const std::vector<double>& xs) {
    if (xs.empty()) return std::pair{0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size();
    return std::pair{mean, std::sqrt(var)};
  };

  st.pd_fraction = st.samples > 0 ? static_cast<double>(pd) / st.samples : 0.0;
  st.missing_rate = total_slots > 0 ? 1.0 - static_cast<double>(present_slots) / total_slots : 0.0;
  std::tie(st.mean_seq_len, st.std_seq_len) = mean_std(seq_lens);
  for (int m = 0; m < 3; ++m)
    std::tie(st.tests_per_id_mean[static_cast<size_t>(m)], st.tests_per_id_std[static_cast<size_t>(m)]) =
        mean_std(per_modality_counts[static_cast<size_t>(m)]);
  return st;
}

std::string CohortStats::table() const {
  std::ostringstream os;
  os.precision(4);
  os << "Samples (#)              " << samples << "\n"
     << "PD & Non-PD (%)          " << 100.0 * pd_fraction << " & " << 100.0 * (1.0 - pd_fraction) << "\n"
     << "Missing rate (%)         " << 100.0 * missing_rate << "\n"
     << "Sequence length per ID   " << mean_seq_len << " +- " << std_seq_len << "\n"
     << "Walking tests per ID     " << tests_per_id_mean[0] << " +- " << tests_per_id_std[0] << "\n"
     << "Tapping tests per ID     " << tests_per_id_mean[1] << " +- " << tests_per_id_std[1] << "\n"
     << "Memory tests per ID      " << tests_per_id_mean[2] << " +- " << tests_per_id_std[2] << "\n";
  return os.str();
}

}  // namespace odemm
