#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "odemm/sync.hpp"

using namespace odemm;

namespace {

constexpr double kHour = 3600.0;

// A record whose payload carries a recognizable tag so we can tell which input
// survived grouping.
RawTestRecord make_record(const std::string& pid, Modality m, double timestamp,
                          MedicationPoint p = MedicationPoint::no_medication, double tag = 0.0) {
  RawTestRecord r;
  r.participant_id = pid;
  r.modality = m;
  r.timestamp = timestamp;
  r.medication_point = p;
  r.payload.modality = m;
  r.payload.channels = {{tag, tag + 1.0}};
  return r;
}

double tag_of(const CleanSegment& seg) { return seg.channels.at(0).at(0); }

bool same_sequence(const ObservationSequence& a, const ObservationSequence& b) {
  if (a.unified_id != b.unified_id) return false;
  if (a.observations.size() != b.observations.size()) return false;
  for (size_t i = 0; i < a.observations.size(); ++i) {
    const auto& oa = a.observations[i];
    const auto& ob = b.observations[i];
    if (oa.time_days != ob.time_days) return false;
    for (Modality m : {Modality::walking, Modality::tapping, Modality::memory}) {
      if (oa.get(m).has_value() != ob.get(m).has_value()) return false;
      if (oa.get(m) && oa.get(m)->channels != ob.get(m)->channels) return false;
    }
  }
  return true;
}

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name) : path("/tmp/odemm_sync_test_" + name) {}
  ~TempPath() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("build_unified_ids partitions by participant and medication point") {
  std::vector<RawTestRecord> recs{
      make_record("p1", Modality::walking, 100.0, MedicationPoint::before_medication),
      make_record("p1", Modality::tapping, 200.0, MedicationPoint::after_medication),
  };
  auto ids = build_unified_ids(recs);
  CHECK(ids.size() == 2);
  CHECK(ids.count(UnifiedId{"p1", MedicationPoint::before_medication}) == 1);
  CHECK(ids.count(UnifiedId{"p1", MedicationPoint::after_medication}) == 1);
}

TEST_CASE("build_unified_ids drops another_time records") {
  SUBCASE("all another_time -> empty map") {
    std::vector<RawTestRecord> recs{
        make_record("p1", Modality::walking, 100.0, MedicationPoint::another_time),
        make_record("p2", Modality::memory, 200.0, MedicationPoint::another_time),
    };
    CHECK(build_unified_ids(recs).empty());
  }
  SUBCASE("mixed: 2 kept, 1 dropped") {
    std::vector<RawTestRecord> recs{
        make_record("p1", Modality::walking, 100.0, MedicationPoint::no_medication),
        make_record("p1", Modality::tapping, 200.0, MedicationPoint::no_medication),
        make_record("p1", Modality::memory, 300.0, MedicationPoint::another_time),
    };
    auto ids = build_unified_ids(recs);
    REQUIRE(ids.size() == 1);
    CHECK(ids.begin()->second.size() == 2);
  }
}

TEST_CASE("synchronize splits at the 24-hour window boundary") {
  double base = 1000000.0;
  std::vector<RawTestRecord> recs{
      make_record("p1", Modality::walking, base + 0 * kHour),
      make_record("p1", Modality::tapping, base + 5 * kHour),
      make_record("p1", Modality::memory, base + 30 * kHour),
  };
  auto seq = synchronize(recs);
  REQUIRE(seq.observations.size() == 2);
  CHECK(seq.observations[0].walking.has_value());
  CHECK(seq.observations[0].tapping.has_value());
  CHECK(!seq.observations[0].memory.has_value());
  CHECK(!seq.observations[1].walking.has_value());
  CHECK(!seq.observations[1].tapping.has_value());
  CHECK(seq.observations[1].memory.has_value());

  // Group times: mean(0h, 5h) = 2.5h anchors day zero; second group sits at 30h.
  CHECK(seq.observations[0].time_days == doctest::Approx(0.0));
  CHECK(seq.observations[1].time_days == doctest::Approx((30.0 - 2.5) / 24.0));
}

TEST_CASE("synchronize keeps the last duplicate of a modality in a window") {
  double base = 1000000.0;
  std::vector<RawTestRecord> recs{
      make_record("p1", Modality::tapping, base + 1 * kHour, MedicationPoint::no_medication, 10.0),
      make_record("p1", Modality::tapping, base + 9 * kHour, MedicationPoint::no_medication, 20.0),
  };
  auto seq = synchronize(recs);
  REQUIRE(seq.observations.size() == 1);
  REQUIRE(seq.observations[0].tapping.has_value());
  CHECK(tag_of(*seq.observations[0].tapping) == 20.0);
  CHECK(seq.observations[0].present_count() == 1);
}

TEST_CASE("synchronize: single record gives a single observation at day zero") {
  auto seq = synchronize({make_record("p1", Modality::memory, 5000.0)});
  REQUIRE(seq.observations.size() == 1);
  CHECK(seq.observations[0].time_days == 0.0);
  CHECK(seq.observations[0].present_count() == 1);
}

TEST_CASE("synchronize rejects an empty record list") {
  CHECK_THROWS_AS(synchronize({}), std::invalid_argument);
}

TEST_CASE("synchronize: observation times strictly increase from zero") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RawTestRecord> recs;
    double t = 1000.0;
    int n = 3 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      t += std::uniform_real_distribution<double>(0.5 * kHour, 60 * kHour)(rng);
      auto m = static_cast<Modality>(rng() % 3);
      recs.push_back(make_record("p", m, t, MedicationPoint::no_medication, double(i)));
    }
    auto seq = synchronize(recs);
    REQUIRE(!seq.observations.empty());
    CHECK(seq.observations.front().time_days == 0.0);
    for (size_t i = 1; i < seq.observations.size(); ++i)
      CHECK(seq.observations[i].time_days > seq.observations[i - 1].time_days);
    for (const auto& o : seq.observations) CHECK(o.present_count() >= 1);
  }
}

TEST_CASE("synchronize is permutation-invariant") {
  std::mt19937_64 rng(99);
  double base = 50000.0;
  std::vector<RawTestRecord> recs;
  for (int i = 0; i < 12; ++i) {
    auto m = static_cast<Modality>(i % 3);
    recs.push_back(make_record("p", m, base + i * 7.3 * kHour, MedicationPoint::no_medication, double(i)));
  }
  auto reference = synchronize(recs);
  for (int trial = 0; trial < 10; ++trial) {
    auto shuffled = recs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(same_sequence(synchronize(shuffled), reference));
  }
}

TEST_CASE("synchronize: every kept record appears in exactly one observation") {
  double base = 1000.0;
  std::vector<RawTestRecord> recs;
  for (int i = 0; i < 9; ++i) {
    auto m = static_cast<Modality>(i % 3);
    recs.push_back(make_record("p", m, base + i * 11.0 * kHour, MedicationPoint::no_medication, double(i)));
  }
  auto seq = synchronize(recs);
  std::vector<double> seen;
  for (const auto& o : seq.observations)
    for (Modality m : {Modality::walking, Modality::tapping, Modality::memory})
      if (o.get(m)) seen.push_back(tag_of(*o.get(m)));
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());  // no duplicates
  CHECK(seen.size() <= recs.size());
  for (double tag : seen) CHECK((tag >= 0.0 && tag < 9.0));
}

TEST_CASE("synchronize is idempotent on kept records") {
  // Records spaced so that dedup cannot shift window anchors.
  double base = 1000.0;
  std::vector<RawTestRecord> recs{
      make_record("p", Modality::walking, base + 0 * kHour, MedicationPoint::no_medication, 1.0),
      make_record("p", Modality::walking, base + 2 * kHour, MedicationPoint::no_medication, 2.0),
      make_record("p", Modality::tapping, base + 3 * kHour, MedicationPoint::no_medication, 3.0),
      make_record("p", Modality::memory, base + 60 * kHour, MedicationPoint::no_medication, 4.0),
      make_record("p", Modality::memory, base + 61 * kHour, MedicationPoint::no_medication, 5.0),
  };
  auto first = synchronize(recs);
  // Rebuild the surviving records with their original timestamps and re-run.
  std::vector<RawTestRecord> kept;
  for (const auto& r : recs) {
    bool survives = false;
    for (const auto& o : first.observations)
      if (o.get(r.modality) && tag_of(*o.get(r.modality)) == tag_of(r.payload)) survives = true;
    if (survives) kept.push_back(r);
  }
  CHECK(kept.size() == 3);
  CHECK(same_sequence(synchronize(kept), first));
}

TEST_CASE("filter_cohort applies age and test-count thresholds") {
  auto make_seq = [](double age, int tests) {
    ObservationSequence s;
    s.unified_id = {"p", MedicationPoint::no_medication};
    s.age = age;
    for (int i = 0; i < tests; ++i) {
      ObservationPoint o;
      o.time_days = i;
      o.walking = CleanSegment{Modality::walking, {{0.0}}};
      s.observations.push_back(o);
    }
    return s;
  };
  SUBCASE("age 44 with 10 tests is dropped") {
    CHECK(filter_cohort({make_seq(44.0, 10)}).empty());
  }
  SUBCASE("age 60 with 4 tests is dropped") {
    CHECK(filter_cohort({make_seq(60.0, 4)}).empty());
  }
  SUBCASE("age 60 with 5 tests is kept") {
    CHECK(filter_cohort({make_seq(60.0, 5)}).size() == 1);
  }
  SUBCASE("age 45 exactly is kept") {
    CHECK(filter_cohort({make_seq(45.0, 5)}).size() == 1);
  }
  SUBCASE("tests counted across modalities, not observations") {
    auto s = make_seq(60.0, 3);
    s.observations[0].tapping = CleanSegment{Modality::tapping, {{0.0}}};
    s.observations[1].memory = CleanSegment{Modality::memory, {{0.0}}};
    CHECK(s.total_tests() == 5);
    CHECK(filter_cohort({s}).size() == 1);
  }
}

TEST_CASE("record file round-trip preserves every field") {
  TempPath tmp("records.ndjson");
  std::vector<RawTestRecord> recs{
      make_record("p1", Modality::walking, 123.5, MedicationPoint::before_medication, 1.5),
      make_record("p2", Modality::memory, 456.25, MedicationPoint::another_time, -2.0),
  };
  recs[0].sample_rate = 50.0;
  write_records(tmp.path, recs);
  double sr = 0.0;
  auto back = read_records(tmp.path, &sr);
  REQUIRE(back.size() == 2);
  CHECK(sr == 50.0);
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].participant_id == recs[i].participant_id);
    CHECK(back[i].modality == recs[i].modality);
    CHECK(back[i].timestamp == recs[i].timestamp);
    CHECK(back[i].medication_point == recs[i].medication_point);
    CHECK(back[i].sample_rate == recs[i].sample_rate);
    CHECK(back[i].payload.channels == recs[i].payload.channels);
  }
}

TEST_CASE("record reader names the offending line") {
  TempPath tmp("bad.ndjson");
  {
    std::vector<RawTestRecord> good{make_record("p1", Modality::walking, 1.0)};
    write_records(tmp.path, good);
    std::ofstream app(tmp.path, std::ios::app);
    app << "{not json\n";
  }
  try {
    read_records(tmp.path);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find(tmp.path) != std::string::npos);
  }
}

TEST_CASE("record reader rejects bad field values with line numbers") {
  TempPath tmp("badfield.ndjson");
  {
    std::ofstream out(tmp.path);
    out << R"({"participant_id":"p","modality":"walking","timestamp":1.0,"medication_point":"no_medication","sample_rate":100.0,"samples":[[0.0]]})"
        << "\n";
    out << R"({"participant_id":"p","modality":"juggling","timestamp":1.0,"medication_point":"no_medication","sample_rate":100.0,"samples":[[0.0]]})"
        << "\n";
  }
  CHECK_THROWS_WITH_AS(read_records(tmp.path), doctest::Contains(":2:"), std::runtime_error);

  {
    std::ofstream out(tmp.path);
    out << R"({"participant_id":"p","modality":"walking","timestamp":-3.0,"medication_point":"no_medication","sample_rate":100.0,"samples":[[0.0]]})"
        << "\n";
  }
  CHECK_THROWS_WITH_AS(read_records(tmp.path), doctest::Contains("timestamp"), std::runtime_error);
}

TEST_CASE("metadata round-trip") {
  TempPath tmp("meta.ndjson");
  std::vector<SubjectMeta> subjects{{"p1", 61.5, "male", true}, {"p2", 47.0, "female", false}};
  write_metadata(tmp.path, subjects);
  auto back = read_metadata(tmp.path);
  REQUIRE(back.size() == 2);
  for (size_t i = 0; i < subjects.size(); ++i) {
    CHECK(back[i].participant_id == subjects[i].participant_id);
    CHECK(back[i].age == subjects[i].age);
    CHECK(back[i].gender == subjects[i].gender);
    CHECK(back[i].professional_diagnosis == subjects[i].professional_diagnosis);
  }
}

TEST_CASE("observation file round-trip preserves masks and payloads") {
  TempPath tmp("obs.ndjson");
  ObservationSequence s;
  s.unified_id = {"p1", MedicationPoint::before_medication};
  s.label = 1;
  s.age = 62.0;
  ObservationPoint o0;
  o0.time_days = 0.0;
  o0.walking = CleanSegment{Modality::walking, {{1.0, 2.0}, {3.0, 4.0}}};
  ObservationPoint o1;
  o1.time_days = 3.25;
  o1.memory = CleanSegment{Modality::memory, {{5.0}}};
  s.observations = {o0, o1};

  write_observations(tmp.path, {s});
  auto back = read_observations(tmp.path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].label == 1);
  CHECK(back[0].age == 62.0);
  CHECK(back[0].unified_id == s.unified_id);
  CHECK(same_sequence(back[0], s));
  REQUIRE(back[0].observations.size() == 2);
  CHECK(!back[0].observations[0].memory.has_value());
  CHECK(back[0].observations[1].memory->channels == o1.memory->channels);
}
